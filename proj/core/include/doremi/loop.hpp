#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "doremi/adapter.hpp"
#include "doremi/aggregate.hpp"
#include "doremi/annotation.hpp"
#include "doremi/corpus.hpp"
#include "doremi/disagreement.hpp"
#include "doremi/predictions.hpp"
#include "doremi/sampler.hpp"

namespace doremi {

enum class mean_scope { candidates, all };
enum class aggregate_source { best, final };
enum class selection_strategy { disagreement, random };

std::string_view to_string(mean_scope s);
mean_scope parse_mean_scope(std::string_view text);
std::string_view to_string(aggregate_source s);
aggregate_source parse_aggregate_source(std::string_view text);

struct loop_config {
  double epsilon = 0.0;
  std::size_t budget = 400;
  sampler_config sampler;
  criterion_kind criterion = criterion_kind::doremi_log;
  mean_scope mean_over = mean_scope::candidates;
  aggregate_source aggregate_from = aggregate_source::best;
  aggregation_config aggregation;
  double delta = 1e-12;
  // `random` replaces disagreement ranking with a uniform draw over all
  // distant pairs; used as the baseline in simulations.
  selection_strategy selection = selection_strategy::disagreement;
  std::uint64_t random_seed = 0;
  unsigned threads = 1;

  // Throws on invalid values; returns non-fatal warnings.
  std::vector<std::string> validate() const;
};

enum class stop_decision { continue_loop, stop_epsilon, stop_budget, stop_exhausted };

std::string_view to_string(stop_decision d);

struct model_history {
  std::string name;
  std::vector<std::string> checkpoints;     // per iteration, relative to the run directory
  std::vector<std::string> matrices;        // per iteration, relative to the run directory
  std::vector<double> dev_long_tail_f1;     // per iteration

  bool operator==(const model_history&) const = default;
};

// Loop checkpoint. Every per-iteration history has iteration + 1 entries.
struct iteration_state {
  int iteration = 0;
  double mean_disagreement = 0.0;
  std::vector<double> mean_history;
  std::vector<std::size_t> candidate_history;
  std::size_t budget_used = 0;
  std::vector<model_history> models;
  bool exhausted = false;  // the last sampling round found no eligible pair

  bool operator==(const iteration_state&) const = default;
};

// Continue while mean > epsilon and budget remains.
stop_decision should_stop(const iteration_state& state, const loop_config& cfg);

// Per model, the iteration with the highest dev long-tail F1; earliest wins
// ties.
std::map<std::string, int> best_iterations(const iteration_state& state);

constexpr int kStateSchemaVersion = 1;

void save_state(const iteration_state& state, const std::filesystem::path& path);
// Throws version_error for other schema versions and parse_error for damaged
// files; never returns partial state.
iteration_state restore_state(const std::filesystem::path& path);

struct loop_inputs {
  relation_schema schema;
  std::shared_ptr<const corpus> ha;
  std::shared_ptr<const corpus> ds;
  std::shared_ptr<const corpus> dev;
  model_pool pool;
  std::vector<std::shared_ptr<model_adapter>> adapters;  // one per pool member
};

// Drives pretrain -> (sample -> annotate -> finetune -> predict)* -> aggregate
// and keeps the run directory in sync:
//
//   state.json                    counters and histories
//   pool.log                      annotation events
//   batches/{iter}.jsonl          sampled batch handed to annotators
//   matrices/{model}/{iter}.pred  distant-set predictions
//   ckpt/{model}/{iter}           adapter checkpoints
//   dds/dds.json, dds/provenance.jsonl
class loop_runner {
 public:
  // Fresh run; pretrains immediately.
  static loop_runner start(loop_inputs inputs, loop_config cfg, std::filesystem::path run_dir);
  // Picks up state, annotations, matrices and the open batch from run_dir.
  static loop_runner resume(loop_inputs inputs, loop_config cfg, std::filesystem::path run_dir);

  const iteration_state& state() const noexcept { return state_; }
  const loop_config& config() const noexcept { return cfg_; }
  const loop_inputs& inputs() const noexcept { return inputs_; }
  const annotation_pool& pool() const noexcept { return pool_; }
  annotation_queue& queue() noexcept { return queue_; }
  const annotation_queue& queue() const noexcept { return queue_; }
  const std::filesystem::path& run_dir() const noexcept { return run_dir_; }
  const std::optional<sample_batch>& current_batch() const noexcept { return batch_; }
  std::span<const prediction_matrix> current_matrices() const noexcept { return current_; }

  stop_decision status() const;

  // Samples the next batch (at most min(k, budget left) pairs), writes it to
  // batches/ and queues it. Returns the open batch if one is already pending.
  const sample_batch& prepare_batch();

  const annotation_record& submit(const entity_pair_key& pair, relation_set labels, const std::string& annotator);
  // Answers every pending pair from `source`; throws precondition_error when
  // the source has no verdict for one.
  void annotate_from(const annotation_source& source);

  // Finetunes every model on HA plus all annotations, re-predicts and
  // recomputes mean disagreement. Requires the open batch fully annotated.
  void run_iteration();

  // Aggregates best (or final) iteration predictions and writes dds/.
  denoised_dataset finish();

  // Full batch-mode run.
  denoised_dataset run_batch(const annotation_source& source);

  // Per-iteration, per-model matrices (DS split); [model][iteration].
  const std::vector<std::vector<prediction_matrix>>& matrix_history() const noexcept { return history_; }

 private:
  loop_runner(loop_inputs inputs, loop_config cfg, std::filesystem::path run_dir);

  void pretrain();
  void train_round(int iteration);
  void update_disagreement();
  void checkpoint() const;

  loop_inputs inputs_;
  loop_config cfg_;
  std::filesystem::path run_dir_;
  iteration_state state_;
  annotation_pool pool_;
  std::unique_ptr<annotation_log> log_;
  annotation_queue queue_;
  std::optional<sample_batch> batch_;
  std::vector<prediction_matrix> current_;
  std::vector<std::vector<prediction_matrix>> history_;
  std::vector<entity_pair_key> all_pairs_;
};

}  // namespace doremi
