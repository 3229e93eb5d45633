#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "doremi/corpus.hpp"
#include "doremi/sampler.hpp"

namespace doremi {

// One annotator verdict for one entity pair. An empty label set means N/A.
struct annotation_record {
  entity_pair_key pair;
  relation_set labels;
  std::string annotator;
  int iteration = 0;
  std::int64_t timestamp_ms = 0;  // UTC, milliseconds since the epoch

  bool is_na() const noexcept { return labels.empty(); }
  bool operator==(const annotation_record&) const = default;
};

std::int64_t utc_now_ms();

// Append-only human-labelled set. No pair appears twice.
class annotation_pool {
 public:
  annotation_pool() = default;
  explicit annotation_pool(std::optional<std::size_t> budget) : budget_(budget) {}

  // Throws conflict_error for a pair already in the pool and
  // precondition_error when the budget guard would be exceeded.
  void append(annotation_record record);

  std::span<const annotation_record> records() const noexcept { return records_; }
  std::size_t budget_used() const noexcept { return records_.size(); }
  std::optional<std::size_t> budget() const noexcept { return budget_; }
  bool contains(const entity_pair_key& pair) const { return index_.contains(pair); }
  const annotation_record* find(const entity_pair_key& pair) const;
  pair_set annotated_pairs() const;

  bool operator==(const annotation_pool& other) const { return records_ == other.records_; }

 private:
  std::optional<std::size_t> budget_;
  std::vector<annotation_record> records_;
  std::unordered_map<entity_pair_key, std::size_t> index_;
};

// Durable event log behind an annotation_pool: one JSON line per accepted
// record, flushed before the call returns.
class annotation_log {
 public:
  explicit annotation_log(std::filesystem::path path);
  void append(const annotation_record& record, const relation_schema& schema);
  const std::filesystem::path& path() const noexcept { return path_; }

  // Rebuilds the pool by replaying every event in order.
  static annotation_pool replay(const std::filesystem::path& path, const relation_schema& schema,
                                std::optional<std::size_t> budget = std::nullopt);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct queue_item {
  entity_pair_key pair;
  double score = 0.0;
  int iteration = 0;
};

struct lease {
  queue_item item;
  std::string annotator;
  std::chrono::steady_clock::time_point expires;
};

// Pending pairs of the current batch, served in batch order (descending
// score). Handing out an item leases it; an expired lease returns the item
// to the front of the line.
class annotation_queue {
 public:
  using clock = std::chrono::steady_clock;

  explicit annotation_queue(std::chrono::seconds lease_timeout = std::chrono::seconds(600))
      : lease_timeout_(lease_timeout) {}

  // Rejects (conflict_error) a batch containing a pair that is already
  // annotated or already pending; the queue is left unchanged.
  void enqueue_batch(const sample_batch& batch, const annotation_pool& pool);

  std::optional<lease> lease_next(const std::string& annotator, clock::time_point now = clock::now());
  bool is_leased(const entity_pair_key& pair, clock::time_point now = clock::now()) const;
  bool is_pending(const entity_pair_key& pair) const;

  // Moves a pending pair into the pool. Throws precondition_error when the
  // pair is not pending and validation_error for labels outside the schema.
  const annotation_record& submit(const entity_pair_key& pair, relation_set labels, const std::string& annotator,
                                  annotation_pool& pool, std::size_t relation_count,
                                  std::int64_t timestamp_ms = utc_now_ms());

  std::size_t size() const noexcept { return pending_.size(); }
  bool empty() const noexcept { return pending_.empty(); }
  std::vector<queue_item> pending() const { return {pending_.begin(), pending_.end()}; }

 private:
  std::chrono::seconds lease_timeout_;
  std::deque<queue_item> pending_;
  std::map<entity_pair_key, lease> leases_;
};

// HA plus one label instance per (pair, relation) of non-N/A records. The
// documents of annotated pairs are appended (labels limited to the annotated
// ones); N/A pairs travel separately as explicit negatives.
struct augmented_training {
  corpus train;
  std::vector<entity_pair_key> negatives;
};

augmented_training training_augment(const annotation_pool& pool, const corpus& ha, const corpus& ds);

struct round_counts {
  std::size_t long_tail = 0;
  std::size_t frequent = 0;
  std::size_t na = 0;

  std::size_t total() const noexcept { return long_tail + frequent + na; }
  bool operator==(const round_counts&) const = default;
};

struct round_stats {
  std::map<int, round_counts> per_iteration;
  round_counts totals;
};

// A record is long-tail if any label is long-tail, N/A if it has no labels,
// frequent otherwise.
round_stats compute_round_stats(const annotation_pool& pool, const relation_set& long_tail);

// Offline import/export: {"title","h_idx","t_idx","labels":[...],"annotator","iteration"}.
std::vector<annotation_record> read_annotations(const std::filesystem::path& path, const relation_schema& schema);
void write_annotations(std::span<const annotation_record> records, const relation_schema& schema,
                       const std::filesystem::path& path);

// Where batch-mode runs get their labels from.
class annotation_source {
 public:
  virtual ~annotation_source() = default;
  virtual std::optional<relation_set> labels_for(const entity_pair_key& pair) const = 0;
  virtual std::string annotator() const = 0;
};

// Labels from an offline annotation file, looked up by pair.
class file_annotation_source final : public annotation_source {
 public:
  explicit file_annotation_source(std::span<const annotation_record> records);
  std::optional<relation_set> labels_for(const entity_pair_key& pair) const override;
  std::string annotator() const override { return "file"; }

 private:
  std::unordered_map<entity_pair_key, relation_set> labels_;
};

// Simulated perfect annotator: answers with the gold labels of `truth`.
class gold_annotation_source final : public annotation_source {
 public:
  explicit gold_annotation_source(std::shared_ptr<const corpus> truth);
  std::optional<relation_set> labels_for(const entity_pair_key& pair) const override;
  std::string annotator() const override { return "oracle"; }

 private:
  std::shared_ptr<const corpus> truth_;
};

}  // namespace doremi
