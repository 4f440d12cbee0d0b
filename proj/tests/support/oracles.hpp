#pragma once

// Straight-line reference implementations used as test oracles. None of them
// call into the library's algorithms; they only share its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oracle {

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL ^ seed;
  for (unsigned char c : bytes) {
    h = h ^ c;
    h = h * 1099511628211ULL;
  }
  return h;
}

/// Signed byte n-gram hashing, L2-normalized. Empty result for no grams.
inline std::vector<double> embed_text(std::string_view text, std::size_t dim, std::size_t n) {
  std::vector<double> v(dim, 0.0);
  std::vector<std::string> grams;
  if (text.empty()) return {};
  if (text.size() < n) {
    grams.emplace_back(text);
  } else {
    for (std::size_t i = 0; i + n <= text.size(); ++i) grams.emplace_back(text.substr(i, n));
  }
  for (const auto& g : grams) {
    const std::uint64_t idx = fnv1a(g, 0) % dim;
    const std::uint64_t s = fnv1a(g, 0x9E3779B97F4A7C15ULL);
    if (s % 2 == 0) {
      v[idx] += 1.0;
    } else {
      v[idx] -= 1.0;
    }
  }
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) return {};
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Ids of the k most similar rows, similarity descending then id ascending.
inline std::vector<std::size_t> knn(const std::vector<std::vector<double>>& rows, const std::vector<double>& q,
                                    std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < rows.size(); ++i) all.push_back({dot(rows[i], q), i});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < all.size() && i < k; ++i) out.push_back(all[i].second);
  return out;
}

inline double gini(const std::map<std::string, double>& counts) {
  double total = 0.0;
  for (const auto& [_, c] : counts) total += c;
  if (total == 0.0) return 0.0;
  double s = 1.0;
  for (const auto& [_, c] : counts) s -= (c / total) * (c / total);
  return s;
}

struct Split {
  bool found = false;
  double weighted_impurity = 0.0;
};

/// Best axis-aligned split of unit-weight items by exhaustive enumeration of
/// every feature and every cut between consecutive distinct values, with at
/// least `min_leaf` items per side.
inline Split best_gini_split(const std::vector<std::vector<double>>& x, const std::vector<std::string>& y,
                             std::size_t min_leaf) {
  Split best;
  const std::size_t n = x.size();
  for (std::size_t f = 0; f < x[0].size(); ++f) {
    std::set<double> values;
    for (const auto& row : x) values.insert(row[f]);
    for (double cut : values) {
      std::map<std::string, double> left, right;
      std::size_t nl = 0, nr = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (x[i][f] <= cut) {
          left[y[i]] += 1;
          ++nl;
        } else {
          right[y[i]] += 1;
          ++nr;
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double w = (static_cast<double>(nl) * gini(left) + static_cast<double>(nr) * gini(right)) /
                       static_cast<double>(n);
      if (!best.found || w < best.weighted_impurity) best = {true, w};
    }
  }
  return best;
}

/// Weighted impurity of a given left/right partition.
inline double partition_impurity(const std::vector<std::string>& y, const std::vector<bool>& goes_left) {
  std::map<std::string, double> left, right;
  double nl = 0, nr = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (goes_left[i]) {
      left[y[i]] += 1;
      nl += 1;
    } else {
      right[y[i]] += 1;
      nr += 1;
    }
  }
  return (nl * gini(left) + nr * gini(right)) / (nl + nr);
}

/// Eq.-1-style vote: most frequent label if it reaches min_vote and is not
/// tied, "null" otherwise. Counts by linear rescans.
inline std::string vote(const std::vector<std::string>& labels, std::size_t min_vote) {
  std::string winner = "null";
  std::size_t best = 0;
  bool tied = false;
  for (const auto& candidate : labels) {
    std::size_t c = 0;
    for (const auto& l : labels) c += (l == candidate) ? 1 : 0;
    if (c > best) {
      best = c;
      winner = candidate;
      tied = false;
    } else if (c == best && candidate != winner) {
      tied = true;
    }
  }
  if (tied || best < min_vote) return "null";
  return winner;
}

/// Every sequence of length 1..max_len over `alphabet`.
inline std::vector<std::vector<std::string>> all_sequences(const std::vector<std::string>& alphabet,
                                                           std::size_t max_len) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::vector<std::string>> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& s : frontier) {
      for (const auto& a : alphabet) {
        auto t = s;
        t.push_back(a);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

struct Rates {
  double tpr = 0.0;
  double fpr = 0.0;
};

/// Recount at one threshold. `predicted`/`confidence` are an estimator's raw
/// outputs; micro normalizes FP by n_types * |columns| - |non-null gold|.
inline Rates recount(const std::vector<std::string>& gold, const std::vector<std::string>& predicted,
                     const std::vector<double>& confidence, double tau, std::size_t n_types, bool micro) {
  double tp = 0, fp = 0, pos = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] != "null") pos += 1;
    const bool emitted = predicted[i] != "null" && confidence[i] > 0.0 && confidence[i] >= tau;
    if (!emitted) continue;
    if (predicted[i] == gold[i]) {
      tp += 1;
    } else {
      fp += 1;
    }
  }
  const double n = static_cast<double>(gold.size());
  const double neg = micro ? static_cast<double>(n_types) * n - pos : n;
  return {pos > 0 ? tp / pos : 0.0, neg > 0 ? fp / neg : 0.0};
}

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Per-type precision/recall/f1 from an explicit confusion count.
inline std::map<std::string, Prf> per_type(const std::vector<std::string>& predicted,
                                           const std::vector<std::string>& gold) {
  std::set<std::string> types;
  for (const auto& g : gold)
    if (g != "null") types.insert(g);
  for (const auto& p : predicted)
    if (p != "null") types.insert(p);
  std::map<std::string, Prf> out;
  for (const auto& t : types) {
    double tp = 0, npred = 0, ngold = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (predicted[i] == t) npred += 1;
      if (gold[i] == t) ngold += 1;
      if (predicted[i] == t && gold[i] == t) tp += 1;
    }
    Prf r;
    r.precision = npred > 0 ? tp / npred : 0.0;
    r.recall = ngold > 0 ? tp / ngold : 0.0;
    r.f1 = (r.precision + r.recall) > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    out[t] = r;
  }
  return out;
}

}  // namespace oracle
