#include "adatyper/evalkit.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "adatyper/random.hpp"

namespace adatyper {

std::string_view to_string(FprMode m) { return m == FprMode::micro ? "micro" : "per-column"; }

FprMode fpr_mode_from_string(std::string_view s) {
  if (s == "micro") return FprMode::micro;
  if (s == "per-column") return FprMode::per_column;
  throw ConfigError("unknown FPR mode '" + std::string(s) + "'");
}

namespace {

struct Denominators {
  double positives = 0;
  double negatives = 0;
};

Denominators denominators(const std::vector<ScoredColumn>& scored, std::size_t n_types, FprMode mode) {
  Denominators d;
  for (const auto& s : scored) d.positives += s.gold != kNullType ? 1 : 0;
  const auto n = static_cast<double>(scored.size());
  d.negatives = mode == FprMode::micro ? static_cast<double>(n_types) * n - d.positives : n;
  return d;
}

bool emitted(const ScoredColumn& s, double tau) {
  return s.predicted != kNullType && s.confidence > 0.0 && s.confidence >= tau;
}

RocPoint make_point(double tau, std::size_t tp, std::size_t fp, const Denominators& d) {
  RocPoint p;
  p.tau = tau;
  p.tp = tp;
  p.fp = fp;
  p.tpr = d.positives > 0 ? static_cast<double>(tp) / d.positives : 0.0;
  p.fpr = d.negatives > 0 ? std::min(1.0, static_cast<double>(fp) / d.negatives) : 0.0;
  return p;
}

}  // namespace

RocPoint roc_point(const std::vector<ScoredColumn>& scored, double tau, std::size_t n_types, FprMode mode) {
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& s : scored) {
    if (!emitted(s, tau)) continue;
    if (s.predicted == s.gold) {
      ++tp;
    } else {
      ++fp;
    }
  }
  return make_point(tau, tp, fp, denominators(scored, n_types, mode));
}

std::vector<RocPoint> roc_curve(const std::vector<ScoredColumn>& scored, std::size_t n_types, FprMode mode) {
  const auto d = denominators(scored, n_types, mode);
  std::vector<const ScoredColumn*> live;
  for (const auto& s : scored) {
    if (s.predicted != kNullType && s.confidence > 0.0) live.push_back(&s);
  }
  std::sort(live.begin(), live.end(), [](auto* a, auto* b) { return a->confidence > b->confidence; });

  // Walk from the highest threshold down, emitting a point after each group
  // of equal confidences.
  std::vector<RocPoint> desc;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < live.size();) {
    const double tau = live[i]->confidence;
    for (; i < live.size() && live[i]->confidence == tau; ++i) {
      if (live[i]->predicted == live[i]->gold) {
        ++tp;
      } else {
        ++fp;
      }
    }
    desc.push_back(make_point(tau, tp, fp, d));
  }
  std::reverse(desc.begin(), desc.end());
  return desc;
}

ThresholdChoice calibrate_threshold(const std::vector<ScoredColumn>& scored, double target_fpr, std::size_t n_types,
                                    FprMode mode) {
  if (!(target_fpr >= 0.0 && target_fpr <= 1.0)) throw ConfigError("target FPR must be in [0, 1]");
  ThresholdChoice out;
  for (const auto& p : roc_curve(scored, n_types, mode)) {
    if (p.fpr <= target_fpr) {
      out.tau = p.tau;
      out.point = p;
      out.qualified = true;
      return out;
    }
  }
  out.tau = 1.0;
  out.point = roc_point(scored, 1.0, n_types, mode);
  out.warning = "no observed threshold reaches FPR <= " + std::to_string(target_fpr) + "; using tau = 1";
  return out;
}

std::vector<ScoredColumn> score_estimator(const Predictor& predictor, EstimatorKind e,
                                          const std::vector<LabeledHoldoutColumn>& holdout) {
  std::vector<ScoredColumn> out;
  out.reserve(holdout.size());
  for (const auto& h : holdout) {
    const auto r = predictor.run(e, h.column);
    out.push_back({h.gold, r.type_name, r.confidence});
  }
  return out;
}

PipelineCalibration calibrate_pipeline(const Predictor& predictor, const std::vector<LabeledHoldoutColumn>& holdout,
                                       double target_fpr, FprMode mode, PipelineConfig base) {
  PipelineCalibration out;
  out.target_fpr = target_fpr;
  out.mode = mode;
  out.config = base;
  const auto n_types = predictor.catalog().non_null_names().size();
  for (auto e : kEstimatorOrder) {
    const auto scored = score_estimator(predictor, e, holdout);
    out.curves[e] = roc_curve(scored, n_types, mode);
    out.choices[e] = calibrate_threshold(scored, target_fpr, n_types, mode);
    out.config.set_tau(e, out.choices[e].tau);
  }
  return out;
}

nlohmann::json to_json(const PipelineCalibration& c) {
  nlohmann::json est = nlohmann::json::object();
  for (const auto& [e, ch] : c.choices) {
    auto curve = nlohmann::json::array();
    for (const auto& p : c.curves.at(e)) curve.push_back({p.tau, p.tpr, p.fpr});
    est[std::string(to_string(e))] = {{"tau", ch.tau},        {"tpr", ch.point.tpr},   {"fpr", ch.point.fpr},
                                      {"tp", ch.point.tp},    {"fp", ch.point.fp},     {"qualified", ch.qualified},
                                      {"warning", ch.warning}, {"curve_tau_tpr_fpr", curve}};
  }
  return {{"target_fpr", c.target_fpr},
          {"fpr_mode", std::string(to_string(c.mode))},
          {"estimators", est},
          {"pipeline", to_json(c.config)}};
}

// ---------------------------------------------------------------------------

TypeScore ScoreReport::type(std::string_view name) const {
  for (const auto& t : per_type) {
    if (t.type_name == name) return t;
  }
  TypeScore z;
  z.type_name = std::string(name);
  return z;
}

ScoreReport score_labels(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  if (predicted.size() != gold.size()) throw Error("prediction and gold lists differ in length");
  std::map<std::string, TypeScore> by_type;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] != kNullType) ++by_type[gold[i]].support;
    if (predicted[i] != kNullType) {
      auto& t = by_type[predicted[i]];
      ++t.predicted;
      if (predicted[i] == gold[i]) ++t.true_positives;
    }
  }
  ScoreReport r;
  r.n_columns = gold.size();
  double weight = 0.0;
  for (auto& [name, t] : by_type) {
    t.type_name = name;
    t.precision = t.predicted ? static_cast<double>(t.true_positives) / static_cast<double>(t.predicted) : 0.0;
    t.recall = t.support ? static_cast<double>(t.true_positives) / static_cast<double>(t.support) : 0.0;
    t.f1 = t.precision + t.recall > 0 ? 2 * t.precision * t.recall / (t.precision + t.recall) : 0.0;
    const auto w = static_cast<double>(t.support);
    r.precision += w * t.precision;
    r.recall += w * t.recall;
    r.f1 += w * t.f1;
    weight += w;
    r.per_type.push_back(t);
  }
  if (weight > 0) {
    r.precision /= weight;
    r.recall /= weight;
    r.f1 /= weight;
  }
  return r;
}

ScoreReport score(const std::vector<Prediction>& predictions, const std::vector<GoldLabel>& gold) {
  std::map<ColumnRef, std::string> g;
  for (const auto& l : gold) {
    if (!g.emplace(l.ref, l.type_name).second) throw Error("duplicate gold label for " + l.ref.to_string());
  }
  if (g.size() != predictions.size()) throw Error("predictions and gold labels cover different columns");
  std::vector<std::string> pred;
  std::vector<std::string> gl;
  for (const auto& p : predictions) {
    auto it = g.find(p.column_ref());
    if (it == g.end()) throw Error("no gold label for " + p.column_ref().to_string());
    pred.push_back(p.type_name());
    gl.push_back(it->second);
  }
  return score_labels(pred, gl);
}

nlohmann::json to_json(const ScoreReport& r) {
  auto types = nlohmann::json::array();
  for (const auto& t : r.per_type) {
    types.push_back({{"type", t.type_name},
                     {"precision", t.precision},
                     {"recall", t.recall},
                     {"f1", t.f1},
                     {"support", t.support},
                     {"predicted", t.predicted}});
  }
  return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}, {"n_columns", r.n_columns},
          {"per_type", types}};
}

// ---------------------------------------------------------------------------

Annotation make_annotation(ColumnRef column, std::string worker_id, std::string_view label) {
  auto l = canonical_type_name(label);
  if (l.empty()) l = std::string(kNullType);
  return {std::move(column), std::move(worker_id), std::move(l)};
}

std::string aggregate_annotations(const std::vector<std::string>& labels, std::size_t min_vote) {
  if (labels.empty()) throw ConfigError("cannot aggregate an empty annotation list");
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  std::size_t best = 0;
  std::size_t n_best = 0;
  const std::string* winner = nullptr;
  for (const auto& [label, c] : counts) {
    if (c > best) {
      best = c;
      n_best = 1;
      winner = &label;
    } else if (c == best) {
      ++n_best;
    }
  }
  if (n_best != 1 || best < min_vote) return std::string(kNullType);
  return *winner;
}

std::map<ColumnRef, std::string> aggregate_by_column(const std::vector<Annotation>& annotations,
                                                     std::size_t min_vote) {
  std::map<ColumnRef, std::vector<std::string>> grouped;
  for (const auto& a : annotations) grouped[a.column].push_back(a.label);
  std::map<ColumnRef, std::string> out;
  for (const auto& [ref, labels] : grouped) out.emplace(ref, aggregate_annotations(labels, min_vote));
  return out;
}

std::vector<std::string> top_labels(const std::vector<std::string>& labels, std::size_t k) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

std::vector<Annotation> filter_workers(const std::vector<Annotation>& annotations, std::size_t k) {
  if (k < 1) throw ConfigError("filter_workers needs k >= 1");
  std::map<std::string, std::vector<std::string>> by_worker;
  for (const auto& a : annotations) by_worker[a.worker_id].push_back(a.label);
  std::set<std::string> keep;
  for (const auto& [w, labels] : by_worker) {
    const auto top = top_labels(labels, k);
    if (std::find(top.begin(), top.end(), kNullType) != top.end()) keep.insert(w);
  }
  std::vector<Annotation> out;
  for (const auto& a : annotations) {
    if (keep.count(a.worker_id)) out.push_back(a);
  }
  return out;
}

void write_annotations(std::ostream& out, const std::vector<Annotation>& annotations) {
  for (const auto& a : annotations) {
    out << nlohmann::json{{"table", a.column.table_id},
                          {"column", a.column.column_index},
                          {"worker", a.worker_id},
                          {"label", a.label}}
               .dump()
        << '\n';
  }
}

std::vector<Annotation> read_annotations(std::istream& in) {
  std::vector<Annotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(make_annotation({j.at("table").get<std::string>(), j.at("column").get<std::size_t>()},
                                    j.at("worker").get<std::string>(), j.at("label").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("annotation line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

QualityScore label_quality(const std::map<ColumnRef, std::string>& labels,
                           const std::map<ColumnRef, std::string>& gold, std::string name) {
  QualityScore q;
  q.name = std::move(name);
  std::size_t given = 0;
  std::size_t correct = 0;
  std::size_t positives = 0;
  for (const auto& [ref, g] : gold) positives += g != kNullType ? 1 : 0;
  for (const auto& [ref, l] : labels) {
    ++q.n_annotations;
    auto it = gold.find(ref);
    if (it == gold.end() || l == kNullType) continue;
    ++given;
    if (l == it->second) ++correct;
  }
  q.precision = given ? static_cast<double>(correct) / static_cast<double>(given) : 0.0;
  q.recall = positives ? static_cast<double>(correct) / static_cast<double>(positives) : 0.0;
  q.f1 = q.precision + q.recall > 0 ? 2 * q.precision * q.recall / (q.precision + q.recall) : 0.0;
  return q;
}

std::vector<QualityScore> honeypot_score(const std::vector<Annotation>& annotations,
                                         const std::map<ColumnRef, std::string>& gold) {
  std::map<std::string, std::map<ColumnRef, std::string>> by_worker;
  for (const auto& a : annotations) {
    if (gold.count(a.column)) by_worker[a.worker_id][a.column] = a.label;
  }
  std::vector<QualityScore> out;
  for (const auto& [w, labels] : by_worker) out.push_back(label_quality(labels, gold, w));
  return out;
}

DesignReport design_report(const std::string& design, const std::vector<Annotation>& annotations,
                           const std::map<ColumnRef, std::string>& gold, std::size_t min_vote, std::size_t top_k,
                           bool filter) {
  DesignReport r;
  r.design = design;
  std::set<std::string> workers;
  for (const auto& a : annotations) workers.insert(a.worker_id);
  r.workers = workers.size();
  const auto kept = filter ? filter_workers(annotations, top_k) : annotations;
  std::set<std::string> kept_workers;
  for (const auto& a : kept) kept_workers.insert(a.worker_id);
  r.workers_kept = kept_workers.size();
  r.aggregated = label_quality(aggregate_by_column(kept, min_vote), gold, design);

  const auto per_worker = honeypot_score(annotations, gold);
  r.mean_worker.name = design;
  for (const auto& q : per_worker) {
    r.mean_worker.precision += q.precision;
    r.mean_worker.recall += q.recall;
    r.mean_worker.f1 += q.f1;
    r.mean_worker.n_annotations += q.n_annotations;
  }
  if (!per_worker.empty()) {
    const auto n = static_cast<double>(per_worker.size());
    r.mean_worker.precision /= n;
    r.mean_worker.recall /= n;
    r.mean_worker.f1 /= n;
  }
  return r;
}

std::vector<Annotation> simulate_annotations(const std::map<ColumnRef, std::string>& gold,
                                             const std::vector<std::string>& label_space, std::size_t n_workers,
                                             double noise, std::uint64_t seed, const std::string& worker_prefix) {
  if (label_space.empty()) throw ConfigError("label space must not be empty");
  std::vector<Annotation> out;
  for (std::size_t w = 0; w < n_workers; ++w) {
    Rng rng(derive_seed(seed, w));
    const auto worker = worker_prefix + std::to_string(w);
    for (const auto& [ref, g] : gold) {
      const auto label = uniform01(rng) < noise ? pick(label_space, rng) : g;
      out.push_back(make_annotation(ref, worker, label));
    }
  }
  return out;
}

}  // namespace adatyper
