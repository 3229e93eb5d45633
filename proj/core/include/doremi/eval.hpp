#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "doremi/corpus.hpp"
#include "doremi/predictions.hpp"

namespace doremi {

// A (pair, relation) triple, on either the predicted or the gold side.
struct fact {
  entity_pair_key pair;
  relation_id relation;

  auto operator<=>(const fact&) const = default;
  bool operator==(const fact&) const = default;
};

std::vector<fact> gold_facts(const corpus& c);
// Facts a model predicts at `threshold` (inclusive), stored entries only.
std::vector<fact> matrix_facts(const prediction_matrix& matrix, double threshold);

enum class ign_mode { pair, fact };

// Entity pairs (or facts) observed in training. Entities are identified across
// documents by their case-folded set of mention names.
class ign_index {
 public:
  ign_index() = default;
  explicit ign_index(ign_mode mode) : mode_(mode) {}

  ign_mode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return mode_ == ign_mode::pair ? pairs_.size() : facts_.size(); }
  bool empty() const noexcept { return size() == 0; }

  void add(const std::string& pair_identity, relation_id r);
  bool matches(const std::string& pair_identity, relation_id r) const;

 private:
  ign_mode mode_ = ign_mode::pair;
  std::set<std::string> pairs_;
  std::set<std::pair<std::string, relation_id>> facts_;
};

std::string pair_identity(const document& doc, int head, int tail);

ign_index build_ign_index(const corpus& train, ign_mode mode);

enum class averaging { micro, macro };

std::string_view to_string(averaging a);

struct metric_values {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ign_precision = 0.0;
  double ign_recall = 0.0;
  double ign_f1 = 0.0;
};

struct relation_confusion {
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t ign_tp = 0, ign_fp = 0, ign_fn = 0;

  bool operator==(const relation_confusion&) const = default;
};

struct metrics_report {
  // slice name -> averaging -> values. "full" is always present.
  std::map<std::string, std::map<averaging, metric_values>> slices;
  std::vector<relation_confusion> per_relation;  // indexed by relation id

  const metric_values& at(const std::string& slice, averaging a) const { return slices.at(slice).at(a); }
};

struct eval_options {
  // When set, gold facts matching the ign index are dropped as well, so ign
  // recall is measured on unseen pairs only.
  bool ign_filter_gold = false;
};

double f1_score(double precision, double recall);

// Scores predictions against the gold labels of `gold`. Every slice restricts
// both sides to its relations; macro averages skip relations with no gold and
// no predicted instance. Ign metrics are the plain metrics recomputed after
// removing predictions that match `ign`.
metrics_report evaluate(std::span<const fact> predictions, const corpus& gold, const ign_index& ign,
                        const std::map<std::string, relation_set>& slices, std::size_t relation_count,
                        const eval_options& options = {});

void write_report_csv(const metrics_report& report, const std::filesystem::path& path);
void write_report_jsonl(const metrics_report& report, const std::filesystem::path& path);
std::string format_report(const metrics_report& report);

struct score_histogram {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  double mean = 0.0;
  bool mean_defined = false;
};

// Histogram of stored scores over [0,1] in equal-width bins; 1.0 lands in the
// last bin.
score_histogram compute_score_histogram(const prediction_matrix& matrix, std::size_t bins);
void write_histogram_csv(const score_histogram& h, const std::filesystem::path& path);

}  // namespace doremi
