import math
import random

import pytest

import adatyper


def small_service(path, **extra):
    return adatyper.Service(path, demo_tables=60, system={"forest": {"n_trees": 15}}, **extra)


def test_embedding_is_unit_norm_and_deterministic():
    v = adatyper.embed_text("postal code")
    assert len(v) == 256
    assert math.isclose(sum(x * x for x in v), 1.0, rel_tol=1e-9)
    assert v == adatyper.embed_text("postal code")
    assert adatyper.embed_text("city") != v


def test_aggregation():
    assert adatyper.aggregate_annotations(["city", "city", "gender"], 2) == "city"
    assert adatyper.aggregate_annotations(["city", "gender"], 1) == "null"
    with pytest.raises(adatyper.ConfigError):
        adatyper.aggregate_annotations([], 1)


def test_synthesize_and_predict(tmp_path):
    manifest = adatyper.synthesize(tmp_path / "corpus", tables=5, seed=2)
    assert manifest
    assert len(list((tmp_path / "corpus" / "tables").glob("*.csv"))) == 5

    with small_service(tmp_path / "run"):
        pass
    preds = adatyper.predict(tmp_path / "run", "city,age\nParis,31\nRome,45\n", "t")
    assert [p["column"] for p in preds] == [0, 1]
    assert preds[0]["type"] == "city"


def test_service_feedback_round_trip(tmp_path):
    names = ["Anna", "Lena", "Maya", "Sofia", "Emma", "Liam", "Noah", "Oliver", "Elena", "Jonas"]
    rng = random.Random(1)
    csv = "given,n\n" + "".join(f"{rng.choice(names)},{i}\n" for i in range(20))
    with small_service(tmp_path) as svc:
        status, body = svc.catalog()
        assert status == 200
        assert len(body["catalog"]["types"]) == 11

        status, body = svc.upload_table(csv, table_id="people")
        assert status == 200
        assert len(body["predictions"]) == 2

        assert svc.upload_table("a,b\n1\n", table_id="bad")[0] == 400
        assert svc.predictions("missing")[0] == 404

        status, body = svc.feedback("people", 0, "first name")
        assert status == 200, body
        assert body["report"]["new_type"] is True
        status, body = svc.predictions("people")
        assert body["predictions"][0]["type"] == "first name"
        before = body["predictions"]

        assert svc.feedback("people", 0, "first name", regex="([")[0] == 422
        assert svc.history()[1]["history"][0]["cycle"] == 1

    with small_service(tmp_path) as again:
        assert again.predictions("people")[1]["predictions"] == before
        assert again.state()[1]["cycle"] == 1


def test_invalid_config_is_a_value_error(tmp_path):
    with pytest.raises(ValueError):
        adatyper.Service(tmp_path, catalog="huge")
