#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "doremi/corpus.hpp"

namespace doremi {

struct relation_score {
  relation_id relation;
  double probability = 0.0;

  bool operator==(const relation_score&) const = default;
};

struct prediction_row {
  entity_pair_key pair;
  std::vector<relation_score> scores;  // ascending relation id

  bool operator==(const prediction_row&) const = default;
};

// Sparse per-model probability store over (entity pair, relation). Rows are
// kept sorted by pair key; any (pair, relation) without a stored entry scores
// exactly 0.0.
class prediction_matrix {
 public:
  // Scores below this are not stored.
  static constexpr double storage_floor = 1e-4;

  prediction_matrix() = default;
  // Sorts rows and scores, drops entries under storage_floor and rejects
  // probabilities outside [0,1] or duplicate pairs/relations.
  prediction_matrix(std::string model, int iteration, std::vector<prediction_row> rows);

  const std::string& model() const noexcept { return model_; }
  int iteration() const noexcept { return iteration_; }

  std::span<const prediction_row> rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  std::size_t entry_count() const noexcept;

  // Stored scores for a pair; empty when the pair has none.
  std::span<const relation_score> row(const entity_pair_key& pair) const;
  double score(const entity_pair_key& pair, relation_id r) const;

  // Rows whose document belongs to `keep`.
  prediction_matrix restricted_to(const corpus& keep) const;

  bool operator==(const prediction_matrix&) const = default;

 private:
  std::string model_;
  int iteration_ = 0;
  std::vector<prediction_row> rows_;
};

struct pool_member {
  std::string name;
  double decision_threshold = 0.5;

  bool operator==(const pool_member&) const = default;
};

// Committee of independently trained models. At least two members; an odd
// size is recommended and `warnings()` says so otherwise.
class model_pool {
 public:
  model_pool() = default;
  explicit model_pool(std::vector<pool_member> members);

  std::span<const pool_member> members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  const pool_member& operator[](std::size_t i) const { return members_.at(i); }
  std::vector<std::string> warnings() const;

 private:
  std::vector<pool_member> members_;
};

// Line-delimited prediction file: {"title", "h_idx", "t_idx", "scores": {code: p}}.
prediction_matrix ingest_predictions(const std::filesystem::path& path, const relation_schema& schema,
                                     std::string model, int iteration);
void write_predictions(const prediction_matrix& matrix, const relation_schema& schema,
                       const std::filesystem::path& path);

// Relations whose stored score is >= threshold. Absent entries never qualify,
// including at threshold 0.
relation_set predicted_relations(const prediction_matrix& matrix, const entity_pair_key& pair,
                                 double threshold);

}  // namespace doremi
