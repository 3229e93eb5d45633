#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "doremi/corpus.hpp"
#include "doremi/disagreement.hpp"
#include "doremi/predictions.hpp"

namespace doremi {

using pair_set = std::unordered_set<entity_pair_key>;

struct sampler_config {
  std::size_t k = 100;
  relation_set long_tail;
  std::optional<std::size_t> max_per_doc;  // unlimited when unset

  void validate() const;
};

struct sample_item {
  entity_pair_key pair;
  double score = 0.0;
  std::vector<std::pair<std::string, relation_set>> predicted;  // per model, pool order

  bool operator==(const sample_item&) const = default;
};

// Strictly descending by score; equal scores ascend by pair key.
struct sample_batch {
  int iteration = 0;
  std::vector<sample_item> items;
  bool shortfall = false;  // fewer than k eligible candidates remained

  bool operator==(const sample_batch&) const = default;
};

// true when `a` must be served before `b`.
bool ranks_before(const scored_pair& a, const scored_pair& b);

// Pairs where some model scores a long-tail relation at or above its own
// decision threshold. Sorted by key.
std::vector<entity_pair_key> candidate_pairs(std::span<const prediction_matrix> matrices, const model_pool& pool,
                                             const relation_set& long_tail);

// Bounded-memory top-k over a score stream. The worst retained entry sits at
// the heap root; merging shard-local selectors yields the same result as one
// selector over the whole stream.
class top_k_selector {
 public:
  explicit top_k_selector(std::size_t k);

  void push(const scored_pair& item);
  void merge(const top_k_selector& other);
  std::size_t size() const noexcept { return heap_.size(); }
  // Best first.
  std::vector<scored_pair> sorted() const;

 private:
  std::size_t k_;
  std::vector<scored_pair> heap_;
};

// The k best-scoring entries of `scored` not in `annotated`. `scored` holds one
// score per candidate pair. With `shards` > 1 the stream is split and reduced
// through per-shard selectors.
sample_batch select_top_k(std::span<const scored_pair> scored, const sampler_config& cfg, const pair_set& annotated,
                          int iteration, unsigned shards = 1);

// Map-based form: every candidate must have a score.
sample_batch select_top_k(std::span<const entity_pair_key> candidates,
                          const std::unordered_map<entity_pair_key, double>& scores, const sampler_config& cfg,
                          const pair_set& annotated, int iteration);

// Uniform sample of k pairs from `universe` minus `annotated`; the
// random-sampling baseline.
sample_batch select_random(std::span<const entity_pair_key> universe, std::size_t k, const pair_set& annotated,
                           int iteration, std::uint64_t seed);

// Fills each item's per-model predicted relation sets.
void attach_predictions(sample_batch& batch, std::span<const prediction_matrix> matrices, const model_pool& pool);

// Line-delimited batch file for annotators: pair key, document text, both
// entities' mentions, per-model predictions and the score.
void write_sample_batch(const sample_batch& batch, const corpus& ds, const relation_schema& schema,
                        const std::filesystem::path& path);
sample_batch read_sample_batch(const std::filesystem::path& path, const relation_schema& schema);

}  // namespace doremi
