#include "doremi/adapter.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <thread>

#include "doremi/error.hpp"
#include "json_io.hpp"

namespace doremi {

using detail::json;

namespace {

constexpr const char* kPlaceholders[] = {"{TRAIN}", "{PREDICT}", "{CHECKPOINT_IN}", "{CHECKPOINT_OUT}", "{OUT}"};

std::string read_tail(const std::filesystem::path& path, std::size_t max_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (all.size() > max_bytes) all.erase(0, all.size() - max_bytes);
  return all;
}

void write_negatives(std::span<const entity_pair_key> negatives, const std::filesystem::path& path) {
  std::string out;
  for (const auto& k : negatives) {
    out += json{{"title", k.doc_id}, {"h_idx", k.head}, {"t_idx", k.tail}}.dump();
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

void check_request(const adapter_request& request) {
  if (request.train == nullptr || request.targets == nullptr) {
    throw argument_error("adapter request needs train and target corpora");
  }
  if (request.checkpoint_out.empty() || request.predictions_out.empty()) {
    throw argument_error("adapter request needs checkpoint and prediction output paths");
  }
  if (request.checkpoint_in && *request.checkpoint_in == request.checkpoint_out) {
    throw argument_error("checkpoint output must differ from checkpoint input");
  }
}

}  // namespace

void adapter_spec::validate() const {
  if (command.empty()) throw argument_error("adapter command is empty");
  for (const char* slot : kPlaceholders) {
    bool found = false;
    for (const auto& arg : command) found = found || arg.find(slot) != std::string::npos;
    if (!found) throw argument_error(std::string("adapter command template lacks placeholder ") + slot);
  }
  if (timeout.count() <= 0) throw argument_error("adapter timeout must be positive");
}

std::vector<std::string> substitute_placeholders(const std::vector<std::string>& templ,
                                                 const std::vector<std::pair<std::string, std::string>>& values) {
  std::vector<std::string> out;
  out.reserve(templ.size());
  for (auto arg : templ) {
    for (const auto& [slot, value] : values) {
      for (auto pos = arg.find(slot); pos != std::string::npos; pos = arg.find(slot, pos + value.size())) {
        arg.replace(pos, slot.size(), value);
      }
    }
    out.push_back(std::move(arg));
  }
  return out;
}

process_outcome run_process(const std::vector<std::string>& argv, const std::filesystem::path& workdir,
                            std::chrono::milliseconds timeout, const std::filesystem::path& log_path) {
  if (argv.empty()) throw argument_error("empty command line");
  if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  const std::string wd = workdir.string();
  const std::string log = log_path.string();

  const pid_t pid = fork();
  if (pid < 0) throw io_error(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    setpgid(0, 0);
    int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      dup2(fd, STDOUT_FILENO);
      dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    if (!wd.empty() && chdir(wd.c_str()) != 0) _exit(126);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  for (;;) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) throw io_error(std::string("waitpid failed: ") + std::strerror(errno));
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw timeout_error("process '" + argv.front() + "' timed out after " +
                          std::to_string(timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  process_outcome outcome;
  outcome.output = read_tail(log_path, 4096);
  if (WIFEXITED(status)) {
    outcome.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    outcome.exit_code = 128 + WTERMSIG(status);
  } else {
    outcome.exit_code = -1;
  }
  return outcome;
}

subprocess_adapter::subprocess_adapter(adapter_spec spec) : spec_(std::move(spec)) { spec_.validate(); }

adapter_result subprocess_adapter::run(const adapter_request& request, const relation_schema& schema) {
  return run_model_adapter(spec_, request, schema);
}

adapter_result run_model_adapter(const adapter_spec& spec, const adapter_request& request,
                                 const relation_schema& schema) {
  spec.validate();
  check_request(request);
  namespace fs = std::filesystem;

  const fs::path scratch = fs::absolute(spec.workdir) / ".doremi-adapter" /
                           (request.model + "-iter" + std::to_string(request.iteration));
  fs::create_directories(scratch);
  const fs::path train_path = scratch / "train.json";
  const fs::path predict_path = scratch / "predict.json";
  write_corpus(*request.train, schema, train_path);
  write_negatives(request.negatives, fs::path(train_path.string() + ".negatives.jsonl"));
  write_corpus(*request.targets, schema, predict_path);

  const fs::path out_path = fs::absolute(request.predictions_out);
  const fs::path ckpt_out = fs::absolute(request.checkpoint_out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  if (ckpt_out.has_parent_path()) fs::create_directories(ckpt_out.parent_path());
  fs::remove(out_path);

  const auto argv = substitute_placeholders(
      spec.command, {{"{TRAIN}", train_path.string()},
                     {"{PREDICT}", predict_path.string()},
                     {"{CHECKPOINT_IN}", request.checkpoint_in ? fs::absolute(*request.checkpoint_in).string() : ""},
                     {"{CHECKPOINT_OUT}", ckpt_out.string()},
                     {"{OUT}", out_path.string()}});

  const auto outcome = run_process(argv, spec.workdir,
                                   std::chrono::duration_cast<std::chrono::milliseconds>(spec.timeout),
                                   scratch / "adapter.log");
  if (outcome.exit_code != 0) {
    throw adapter_error("adapter for model '" + request.model + "' exited with status " +
                            std::to_string(outcome.exit_code),
                        outcome.output);
  }
  if (!fs::exists(out_path)) {
    throw protocol_error("adapter for model '" + request.model + "' did not write predictions to " +
                         out_path.string());
  }
  auto matrix = ingest_predictions(out_path, schema, request.model, request.iteration);
  fs::remove_all(scratch);
  return {std::move(matrix), ckpt_out};
}

synthetic_adapter::synthetic_adapter(synthetic_params base, synthetic_learning learning,
                                     std::shared_ptr<const corpus> truth)
    : base_(std::move(base)), learning_(learning), truth_(std::move(truth)) {
  base_.validate();
}

adapter_result synthetic_adapter::run(const adapter_request& request, const relation_schema& schema) {
  check_request(request);
  if (request.checkpoint_in && !std::filesystem::exists(*request.checkpoint_in)) {
    throw precondition_error("checkpoint " + request.checkpoint_in->string() + " does not exist");
  }

  // Hidden truth replaces whatever labels the targets carry.
  std::vector<document> docs;
  docs.reserve(request.targets->size());
  for (const auto& doc : request.targets->documents()) {
    const document* hidden = truth_ ? truth_->find(doc.title) : nullptr;
    docs.push_back(hidden != nullptr ? *hidden : doc);
  }
  const corpus truth_view(request.targets->tag(), std::move(docs));

  const auto params = trained_params(base_, *request.train, schema, learning_);
  const auto known = memorize(*request.train, request.negatives);
  auto matrix = synthetic_model(truth_view, params, schema, request.model, request.iteration, &known);

  const auto counts = relation_frequencies(*request.train, schema.size());
  json ckpt = {{"model", request.model},
               {"iteration", request.iteration},
               {"seed", base_.seed},
               {"train_documents", request.train->size()},
               {"relation_counts", counts.counts},
               {"memorized_pairs", known.size()}};
  if (request.checkpoint_in) ckpt["resumed_from"] = request.checkpoint_in->string();
  detail::write_file_atomic(request.checkpoint_out, ckpt.dump());
  write_predictions(matrix, schema, request.predictions_out);
  return {std::move(matrix), request.checkpoint_out};
}

}  // namespace doremi
