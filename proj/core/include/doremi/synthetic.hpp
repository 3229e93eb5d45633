#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>

#include "doremi/corpus.hpp"
#include "doremi/predictions.hpp"

namespace doremi {

// Noisy-oracle stand-in for a trained relation extractor. True labels score
// near `confidence_mean`, non-labels near 1 - confidence_mean; with
// probability `flip_rate` a score is drawn from the opposite side instead.
struct synthetic_params {
  std::uint64_t seed = 0;
  double confidence_mean = 0.7;
  double confidence_spread = 0.2;  // half-width of the triangular noise
  double flip_rate = 0.0;
  std::map<relation_id, double> per_relation_skill;  // flip rate overrides
  // Non-labels flip at (relation flip rate) * negative_flip_scale.
  double negative_flip_scale = 1.0;

  void validate() const;
  double flip_for(relation_id r) const;
};

// Pairs whose label set the model has seen in training. They are predicted
// without flips.
using memorized_labels = std::unordered_map<entity_pair_key, relation_set>;

// Deterministic in (params.seed, pair, relation): the same seed reproduces the
// same matrix bit for bit, regardless of document order.
prediction_matrix synthetic_model(const corpus& gold, const synthetic_params& params,
                                  const relation_schema& schema, std::string model = "synthetic",
                                  int iteration = 0, const memorized_labels* memorized = nullptr);

// How a synthetic model improves with training data. Per-relation flip rate
// shrinks as base * scale / (scale + n_r), n_r being the relation's instance
// count in the training corpus.
struct synthetic_learning {
  double learning_scale = 20.0;
};

synthetic_params trained_params(const synthetic_params& base, const corpus& train,
                                const relation_schema& schema, const synthetic_learning& learning);

// Every labelled pair of `train` plus the explicit negatives.
memorized_labels memorize(const corpus& train, std::span<const entity_pair_key> negatives);

}  // namespace doremi
