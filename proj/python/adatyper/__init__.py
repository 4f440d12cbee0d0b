"""Adaptive semantic column type detection.

Thin wrapper over the native core. JSON results come back as dicts and
service calls as ``(status, body)`` pairs.
"""

import json

from . import _core
from ._core import CatalogMismatchError, ConfigError, Error, FormatError

__all__ = [
    "CatalogMismatchError",
    "ConfigError",
    "Error",
    "FormatError",
    "Service",
    "adaptation_experiment",
    "aggregate_annotations",
    "calibrate",
    "embed_text",
    "predict",
    "synthesize",
]


def embed_text(text, dimension=256, ngram=3):
    """Unit-norm hashing embedding of ``text`` as a list of floats."""
    return _core.embed_text(text, dimension, ngram)


def aggregate_annotations(labels, min_vote=1):
    return _core.aggregate_annotations(list(labels), min_vote)


def synthesize(out_dir, tables=100, seed=0, domain="source"):
    """Write a labeled synthetic corpus directory; returns its manifest."""
    return json.loads(_core.synthesize(str(out_dir), tables, seed, domain))


def predict(data_dir, table_text, table_id=""):
    """Predictions for CSV text under a stored run directory."""
    return json.loads(_core.predict(str(data_dir), table_text, table_id))


def calibrate(**options):
    return json.loads(_core.calibrate(json.dumps(options)))


def adaptation_experiment(**options):
    return json.loads(_core.adaptation_experiment(json.dumps(options)))


def _decode(reply):
    status, body = reply
    return status, json.loads(body)


class Service:
    """In-process service over a run directory.

    Keyword arguments are run configuration keys, e.g. ``data_dir``,
    ``seed``, ``demo_tables`` or ``system``.
    """

    def __init__(self, data_dir=None, **config):
        if data_dir is not None:
            config["data_dir"] = str(data_dir)
        self._svc = _core.Service(json.dumps(config))

    def upload_table(self, body, content_type="text/csv", table_id=""):
        if isinstance(body, dict):
            body, content_type = json.dumps(body), "application/json"
        return _decode(self._svc.upload_table(body, content_type, table_id))

    def feedback(self, table_id, column_index, corrected_type, **extra):
        request = {"table_id": table_id, "column_index": column_index, "corrected_type": corrected_type, **extra}
        return _decode(self._svc.feedback(json.dumps(request)))

    def register_type(self, name, category="user-defined"):
        return _decode(self._svc.register_type(json.dumps({"name": name, "category": category})))

    def catalog(self):
        return _decode(self._svc.catalog())

    def state(self):
        return _decode(self._svc.state())

    def history(self):
        return _decode(self._svc.history())

    def predictions(self, table_id):
        return _decode(self._svc.predictions(table_id))

    def job(self, job_id):
        return _decode(self._svc.job(job_id))

    def wait_for_jobs(self):
        self._svc.wait_for_jobs()

    def serve(self, host="127.0.0.1", port=8080):
        return self._svc.serve(host, port)

    def close(self):
        self._svc.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
