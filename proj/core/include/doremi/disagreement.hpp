#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "doremi/corpus.hpp"
#include "doremi/predictions.hpp"

namespace doremi {

struct disagreement_config {
  double delta = 1e-12;            // shift inside log(phi + delta)
  std::size_t relation_count = 0;  // |R|; every relation enters the product
  std::size_t expected_models = 0;  // pool size to check against; 0 skips the check

  void validate() const;
};

enum class criterion_kind { doremi_log, ppm, ppd, max_entropy };

std::string_view to_string(criterion_kind kind);
criterion_kind parse_criterion(std::string_view text);

struct disagreement_score {
  entity_pair_key pair;
  std::vector<double> per_relation;  // phi(r | pair), indexed by relation id
  double pair_product = 0.0;         // prod_r phi(r | pair)
  double log_score = 0.0;            // sum_r log(phi(r | pair) + delta)
};

// Probability that n independent models do not agree unanimously on one
// relation: 1 - [prod p_i + prod (1 - p_i)]. Needs n >= 2.
double relation_disagreement(std::span<const double> probs);

disagreement_score pair_disagreement(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
                                     const disagreement_config& cfg);

// Arithmetic mean of pair products, summed in input order. Throws on empty
// input so a stop test can never pass vacuously.
double mean_disagreement(std::span<const double> pair_products);
double mean_disagreement(std::span<const disagreement_score> scores);

// Mean over relations of 1 - prod_i p_i.
double ppm_score(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
                 const disagreement_config& cfg);
// Sum over relations of log((1 - prod_i p_i) + delta).
double ppd_score(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
                 const disagreement_config& cfg);
// Sum over relations of the binary entropy (nats) of the committee-mean
// probability.
double entropy_score(std::span<const prediction_matrix> matrices, const entity_pair_key& pair,
                     const disagreement_config& cfg);

double binary_entropy(double p);

struct scored_pair {
  entity_pair_key pair;
  double score = 0.0;

  bool operator==(const scored_pair&) const = default;
};

// One score per input pair, in input order. `threads` > 1 shards the pairs;
// the output is identical for any shard count.
std::vector<scored_pair> score_pairs(criterion_kind criterion, std::span<const prediction_matrix> matrices,
                                     std::span<const entity_pair_key> pairs, const disagreement_config& cfg,
                                     unsigned threads = 1);

// Pair products for the mean-disagreement stop test.
std::vector<double> pair_products(std::span<const prediction_matrix> matrices,
                                  std::span<const entity_pair_key> pairs, const disagreement_config& cfg,
                                  unsigned threads = 1);

}  // namespace doremi
