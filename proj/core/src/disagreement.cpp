#include "doremi/disagreement.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "doremi/error.hpp"

namespace doremi {
namespace {

void check_committee(std::span<const prediction_matrix> matrices, const disagreement_config& cfg) {
  cfg.validate();
  if (matrices.size() < 2) throw argument_error("disagreement needs at least two models");
  if (cfg.expected_models != 0 && matrices.size() != cfg.expected_models) {
    throw argument_error("got " + std::to_string(matrices.size()) + " prediction matrices for a pool of " +
                         std::to_string(cfg.expected_models) + " models");
  }
}

// Dense (relation x model) probabilities for one pair. Absent entries are 0.
class committee_view {
 public:
  committee_view(std::size_t models, std::size_t relations) : models_(models), probs_(models * relations) {}

  void load(std::span<const prediction_matrix> matrices, const entity_pair_key& pair) {
    std::fill(probs_.begin(), probs_.end(), 0.0);
    for (std::size_t m = 0; m < matrices.size(); ++m) {
      for (const auto& s : matrices[m].row(pair)) {
        const std::size_t r = s.relation.index;
        if (r * models_ + m < probs_.size()) probs_[r * models_ + m] = s.probability;
      }
    }
  }

  std::span<const double> relation(std::size_t r) const {
    return std::span<const double>(probs_).subspan(r * models_, models_);
  }

 private:
  std::size_t models_;
  std::vector<double> probs_;
};

double product(std::span<const double> xs) {
  double p = 1.0;
  for (double x : xs) p *= x;
  return p;
}

double clamp_unit(double x) { return std::clamp(x, 0.0, 1.0); }

double doremi_log(const committee_view& view, const disagreement_config& cfg) {
  double sum = 0.0;
  for (std::size_t r = 0; r < cfg.relation_count; ++r) {
    sum += std::log(relation_disagreement(view.relation(r)) + cfg.delta);
  }
  return sum;
}

double product_of_disagreements(const committee_view& view, const disagreement_config& cfg) {
  double log_sum = 0.0;
  for (std::size_t r = 0; r < cfg.relation_count; ++r) {
    const double phi = relation_disagreement(view.relation(r));
    if (phi <= 0.0) return 0.0;
    log_sum += std::log(phi);
  }
  return std::exp(log_sum);  // underflows to 0, which is the intended clamp
}

double ppm(const committee_view& view, const disagreement_config& cfg) {
  double sum = 0.0;
  for (std::size_t r = 0; r < cfg.relation_count; ++r) sum += 1.0 - product(view.relation(r));
  return sum / static_cast<double>(cfg.relation_count);
}

double ppd(const committee_view& view, const disagreement_config& cfg) {
  double sum = 0.0;
  for (std::size_t r = 0; r < cfg.relation_count; ++r) {
    sum += std::log(clamp_unit(1.0 - product(view.relation(r))) + cfg.delta);
  }
  return sum;
}

double entropy(const committee_view& view, const disagreement_config& cfg) {
  double sum = 0.0;
  for (std::size_t r = 0; r < cfg.relation_count; ++r) {
    const auto probs = view.relation(r);
    double mean = 0.0;
    for (double p : probs) mean += p;
    sum += binary_entropy(mean / static_cast<double>(probs.size()));
  }
  return sum;
}

double dispatch(criterion_kind criterion, const committee_view& view, const disagreement_config& cfg) {
  switch (criterion) {
    case criterion_kind::doremi_log: return doremi_log(view, cfg);
    case criterion_kind::ppm: return ppm(view, cfg);
    case criterion_kind::ppd: return ppd(view, cfg);
    case criterion_kind::max_entropy: return entropy(view, cfg);
  }
  throw argument_error("unknown criterion");
}

// Runs fn(view, begin, end) over contiguous shards of [0, n).
template <class Fn>
void sharded(std::size_t n, unsigned threads, std::size_t models, std::size_t relations, Fn fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n / 64))));
  if (threads == 1) {
    committee_view view(models, relations);
    fn(view, 0, n);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    workers.emplace_back([&, begin, end] {
      committee_view view(models, relations);
      fn(view, begin, end);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace

void disagreement_config::validate() const {
  if (!(delta > 0.0 && delta < 1e-6)) throw argument_error("delta must lie in (0, 1e-6)");
  if (relation_count == 0) throw argument_error("relation universe is empty");
}

std::string_view to_string(criterion_kind kind) {
  switch (kind) {
    case criterion_kind::doremi_log: return "doremi_log";
    case criterion_kind::ppm: return "ppm";
    case criterion_kind::ppd: return "ppd";
    case criterion_kind::max_entropy: return "max_entropy";
  }
  return "?";
}

criterion_kind parse_criterion(std::string_view text) {
  if (text == "doremi_log" || text == "DOREMI_LOG" || text == "doremi") return criterion_kind::doremi_log;
  if (text == "ppm" || text == "PPM") return criterion_kind::ppm;
  if (text == "ppd" || text == "PPD") return criterion_kind::ppd;
  if (text == "max_entropy" || text == "MAX_ENTROPY" || text == "entropy") return criterion_kind::max_entropy;
  throw argument_error("unknown criterion '" + std::string(text) + "'");
}

double relation_disagreement(std::span<const double> probs) {
  if (probs.size() < 2) throw argument_error("relation disagreement needs at least two probabilities");
  double all_yes = 1.0;
  double all_no = 1.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw argument_error("probability outside [0,1]");
    all_yes *= p;
    all_no *= 1.0 - p;
  }
  return clamp_unit(1.0 - (all_yes + all_no));
}

disagreement_score pair_disagreement(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
                                     const disagreement_config& cfg) {
  check_committee(matrices, cfg);
  committee_view view(matrices.size(), cfg.relation_count);
  view.load(matrices, pair);
  disagreement_score out;
  out.pair = pair;
  out.per_relation.resize(cfg.relation_count);
  for (std::size_t r = 0; r < cfg.relation_count; ++r) {
    out.per_relation[r] = relation_disagreement(view.relation(r));
    out.log_score += std::log(out.per_relation[r] + cfg.delta);
  }
  out.pair_product = product_of_disagreements(view, cfg);
  return out;
}

double mean_disagreement(std::span<const double> pair_products) {
  if (pair_products.empty()) throw precondition_error("mean disagreement over an empty set of pairs");
  double sum = 0.0;
  for (double p : pair_products) sum += p;
  return sum / static_cast<double>(pair_products.size());
}

double mean_disagreement(std::span<const disagreement_score> scores) {
  std::vector<double> products;
  products.reserve(scores.size());
  for (const auto& s : scores) products.push_back(s.pair_product);
  return mean_disagreement(products);
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
}

namespace {

template <class Score>
double single(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
              const disagreement_config& cfg, Score score) {
  check_committee(matrices, cfg);
  committee_view view(matrices.size(), cfg.relation_count);
  view.load(matrices, pair);
  return score(view, cfg);
}

}  // namespace

double ppm_score(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
                 const disagreement_config& cfg) {
  return single(matrices, pair, cfg, ppm);
}

double ppd_score(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
                 const disagreement_config& cfg) {
  return single(matrices, pair, cfg, ppd);
}

double entropy_score(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
                     const disagreement_config& cfg) {
  return single(matrices, pair, cfg, entropy);
}

std::vector<scored_pair> score_pairs(criterion_kind criterion, std::span<const prediction_matrix> matrices,
                                     std::span<const entity_pair_key> pairs, const disagreement_config& cfg,
                                     unsigned threads) {
  std::vector<scored_pair> out(pairs.size());
  if (pairs.empty()) return out;
  check_committee(matrices, cfg);
  sharded(pairs.size(), threads, matrices.size(), cfg.relation_count,
          [&](committee_view& view, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
              view.load(matrices, pairs[i]);
              out[i] = {pairs[i], dispatch(criterion, view, cfg)};
            }
          });
  return out;
}

std::vector<double> pair_products(std::span<const prediction_matrix> matrices,
                                  std::span<const entity_pair_key> pairs, const disagreement_config& cfg,
                                  unsigned threads) {
  std::vector<double> out(pairs.size());
  if (pairs.empty()) return out;
  check_committee(matrices, cfg);
  sharded(pairs.size(), threads, matrices.size(), cfg.relation_count,
          [&](committee_view& view, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
              view.load(matrices, pairs[i]);
              out[i] = product_of_disagreements(view, cfg);
            }
          });
  return out;
}

}  // namespace doremi
