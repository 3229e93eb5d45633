#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "doremi/corpus.hpp"
#include "doremi/predictions.hpp"
#include "doremi/synthetic.hpp"

namespace doremi {

// External model adapter: an executable plus an argument template. The
// placeholders {TRAIN}, {PREDICT}, {CHECKPOINT_IN}, {CHECKPOINT_OUT} and {OUT}
// are substituted per invocation; {CHECKPOINT_IN} becomes the empty string
// when training from scratch. The adapter writes a prediction file to {OUT}
// and exits 0.
struct adapter_spec {
  std::vector<std::string> command;
  std::filesystem::path workdir = ".";
  std::chrono::seconds timeout{3600};

  void validate() const;
};

// One train-or-finetune followed by prediction over `targets`.
struct adapter_request {
  std::string model;
  int iteration = 0;
  const corpus* train = nullptr;
  // Pairs annotated as N/A. Written next to the training file as
  // "<train>.negatives.jsonl" for subprocess adapters.
  std::span<const entity_pair_key> negatives;
  const corpus* targets = nullptr;
  std::optional<std::filesystem::path> checkpoint_in;
  std::filesystem::path checkpoint_out;
  std::filesystem::path predictions_out;
};

struct adapter_result {
  prediction_matrix predictions;
  std::filesystem::path checkpoint_out;
};

class model_adapter {
 public:
  virtual ~model_adapter() = default;
  virtual adapter_result run(const adapter_request& request, const relation_schema& schema) = 0;
};

class subprocess_adapter final : public model_adapter {
 public:
  explicit subprocess_adapter(adapter_spec spec);
  adapter_result run(const adapter_request& request, const relation_schema& schema) override;
  const adapter_spec& spec() const noexcept { return spec_; }

 private:
  adapter_spec spec_;
};

// In-process synthetic model. Training only changes per-relation skill and the
// set of memorized pairs, so "finetuning" is a pure function of the training
// corpus; the checkpoint records what was learned for auditing.
class synthetic_adapter final : public model_adapter {
 public:
  // `truth` holds hidden ground-truth labels for target documents; targets
  // missing from it fall back to their own labels.
  synthetic_adapter(synthetic_params base, synthetic_learning learning, std::shared_ptr<const corpus> truth);
  adapter_result run(const adapter_request& request, const relation_schema& schema) override;

 private:
  synthetic_params base_;
  synthetic_learning learning_;
  std::shared_ptr<const corpus> truth_;
};

adapter_result run_model_adapter(const adapter_spec& spec, const adapter_request& request,
                                 const relation_schema& schema);

struct process_outcome {
  int exit_code = 0;
  std::string output;  // tail of combined stdout/stderr
};

// Runs argv without a shell. Throws timeout_error after `timeout` (the child is
// killed) and io_error when the process cannot be started.
process_outcome run_process(const std::vector<std::string>& argv, const std::filesystem::path& workdir,
                            std::chrono::milliseconds timeout, const std::filesystem::path& log_path);

std::vector<std::string> substitute_placeholders(const std::vector<std::string>& templ,
                                                 const std::vector<std::pair<std::string, std::string>>& values);

}  // namespace doremi
