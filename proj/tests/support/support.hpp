#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "doremi/adapter.hpp"
#include "doremi/corpus.hpp"
#include "doremi/predictions.hpp"

namespace doremi::testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(DOREMI_FIXTURES) / name; }

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(DOREMI_SCRATCH) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Shell script adapter; positional args $1..$5 are TRAIN, PREDICT,
// CHECKPOINT_IN, CHECKPOINT_OUT, OUT.
inline adapter_spec shell_adapter(const std::string& script, const std::filesystem::path& workdir,
                                  std::chrono::seconds timeout = std::chrono::seconds(30)) {
  return {{"/bin/sh", "-c", script, "sh", "{TRAIN}", "{PREDICT}", "{CHECKPOINT_IN}", "{CHECKPOINT_OUT}", "{OUT}"},
          workdir, timeout};
}

inline relation_id rel(std::uint16_t i) { return relation_id{i}; }

// One sentence, one single-token mention per entity.
inline document make_doc(const std::string& title, int entities, std::vector<std::tuple<int, int, int>> labels = {}) {
  document d;
  d.title = title;
  d.sentences.emplace_back();
  for (int e = 0; e < entities; ++e) {
    d.sentences[0].push_back(title + "_e" + std::to_string(e));
    d.entities.push_back({e, {{0, e, e + 1, title + "_e" + std::to_string(e), "MISC"}}, "MISC"});
  }
  for (auto [h, t, r] : labels) d.labels.push_back({h, t, rel(static_cast<std::uint16_t>(r)), {}});
  return d;
}

using score_map = std::map<std::tuple<std::string, int, int>, std::map<int, double>>;

inline prediction_matrix make_matrix(const std::string& model, const score_map& scores, int iteration = 0) {
  std::vector<prediction_row> rows;
  for (const auto& [key, rs] : scores) {
    prediction_row row{{std::get<0>(key), std::get<1>(key), std::get<2>(key)}, {}};
    for (auto [r, p] : rs) row.scores.push_back({rel(static_cast<std::uint16_t>(r)), p});
    rows.push_back(std::move(row));
  }
  return prediction_matrix(model, iteration, std::move(rows));
}

// ---- independent oracles ----

// Probability that n independent Bernoulli votes are not unanimous, by summing
// over all 2^n joint outcomes.
inline double brute_disagreement(const std::vector<double>& p) {
  const std::size_t n = p.size();
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
    if (mask == 0 || mask == (1U << n) - 1) continue;
    double prob = 1.0;
    for (std::size_t i = 0; i < n; ++i) prob *= (mask >> i & 1U) ? p[i] : 1.0 - p[i];
    total += prob;
  }
  return total;
}

// probs[model][relation]
using prob_table = std::vector<std::vector<double>>;

inline double oracle_log_score(const prob_table& t, double delta) {
  double s = 0.0;
  for (std::size_t r = 0; r < t[0].size(); ++r) {
    std::vector<double> col;
    for (const auto& m : t) col.push_back(m[r]);
    s += std::log(brute_disagreement(col) + delta);
  }
  return s;
}

inline double oracle_product(const prob_table& t) {
  double s = 1.0;
  for (std::size_t r = 0; r < t[0].size(); ++r) {
    std::vector<double> col;
    for (const auto& m : t) col.push_back(m[r]);
    s *= brute_disagreement(col);
  }
  return s;
}

inline double oracle_ppm(const prob_table& t) {
  double s = 0.0;
  for (std::size_t r = 0; r < t[0].size(); ++r) {
    double prod = 1.0;
    for (const auto& m : t) prod *= m[r];
    s += 1.0 - prod;
  }
  return s / static_cast<double>(t[0].size());
}

inline double oracle_ppd(const prob_table& t, double delta) {
  double s = 0.0;
  for (std::size_t r = 0; r < t[0].size(); ++r) {
    double prod = 1.0;
    for (const auto& m : t) prod *= m[r];
    s += std::log(1.0 - prod + delta);
  }
  return s;
}

inline double oracle_entropy(const prob_table& t) {
  double s = 0.0;
  for (std::size_t r = 0; r < t[0].size(); ++r) {
    double mean = 0.0;
    for (const auto& m : t) mean += m[r];
    mean /= static_cast<double>(t.size());
    if (mean > 0.0) s -= mean * std::log(mean);
    if (mean < 1.0) s -= (1.0 - mean) * std::log(1.0 - mean);
  }
  return s;
}

// Probabilities on a 1/1000 grid so they survive a text round trip and stay
// above the storage floor.
inline double grid_prob(std::mt19937_64& rng) {
  return static_cast<double>(std::uniform_int_distribution<int>(1, 1000)(rng)) / 1000.0;
}

}  // namespace doremi::testing
