#include "doremi/loop.hpp"

#include <algorithm>
#include <future>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "doremi/error.hpp"
#include "doremi/eval.hpp"
#include "json_io.hpp"

namespace doremi {

using detail::field;
using detail::json;
namespace fs = std::filesystem;

std::string_view to_string(mean_scope s) { return s == mean_scope::all ? "all" : "candidates"; }

mean_scope parse_mean_scope(std::string_view text) {
  if (text == "all") return mean_scope::all;
  if (text == "candidates") return mean_scope::candidates;
  throw argument_error("mean-over must be 'all' or 'candidates'");
}

std::string_view to_string(aggregate_source s) { return s == aggregate_source::final ? "final" : "best"; }

aggregate_source parse_aggregate_source(std::string_view text) {
  if (text == "best") return aggregate_source::best;
  if (text == "final") return aggregate_source::final;
  throw argument_error("aggregate-from must be 'best' or 'final'");
}

std::string_view to_string(stop_decision d) {
  switch (d) {
    case stop_decision::continue_loop: return "continue";
    case stop_decision::stop_epsilon: return "stop_epsilon";
    case stop_decision::stop_budget: return "stop_budget";
    case stop_decision::stop_exhausted: return "stop_exhausted";
  }
  return "?";
}

std::vector<std::string> loop_config::validate() const {
  if (!(epsilon >= 0.0)) throw argument_error("epsilon must be >= 0");
  sampler.validate();
  aggregation.validate();
  disagreement_config{delta, 1, 0}.validate();
  std::vector<std::string> warnings;
  if (budget == 0) warnings.push_back("budget 0: the loop stops after pretraining");
  if (budget < sampler.k) {
    warnings.push_back("budget " + std::to_string(budget) + " is smaller than k " + std::to_string(sampler.k));
  }
  return warnings;
}

stop_decision should_stop(const iteration_state& state, const loop_config& cfg) {
  if (state.mean_disagreement <= cfg.epsilon) return stop_decision::stop_epsilon;
  if (state.budget_used >= cfg.budget) return stop_decision::stop_budget;
  if (state.exhausted) return stop_decision::stop_exhausted;
  return stop_decision::continue_loop;
}

std::map<std::string, int> best_iterations(const iteration_state& state) {
  std::map<std::string, int> out;
  for (const auto& m : state.models) {
    if (m.dev_long_tail_f1.empty()) throw precondition_error("model '" + m.name + "' has no dev F1 history");
    const auto it = std::max_element(m.dev_long_tail_f1.begin(), m.dev_long_tail_f1.end());
    out[m.name] = static_cast<int>(it - m.dev_long_tail_f1.begin());
  }
  return out;
}

void save_state(const iteration_state& state, const fs::path& path) {
  json models = json::array();
  for (const auto& m : state.models) {
    models.push_back({{"name", m.name},
                      {"checkpoints", m.checkpoints},
                      {"matrices", m.matrices},
                      {"dev_long_tail_f1", m.dev_long_tail_f1}});
  }
  json j = {{"schema_version", kStateSchemaVersion},
            {"iteration", state.iteration},
            {"mean_disagreement", state.mean_disagreement},
            {"mean_history", state.mean_history},
            {"candidate_history", state.candidate_history},
            {"budget_used", state.budget_used},
            {"exhausted", state.exhausted},
            {"models", std::move(models)}};
  detail::write_file_atomic(path, j.dump(2));
}

iteration_state restore_state(const fs::path& path) {
  const json j = detail::read_json_file(path);
  const std::string ctx = path.string();
  if (!j.is_object()) throw parse_error(ctx + ": checkpoint is not an object");
  const int version = field<int>(j, "schema_version", ctx);
  if (version != kStateSchemaVersion) {
    throw version_error(ctx + ": checkpoint schema version " + std::to_string(version) + " cannot be read by version " +
                        std::to_string(kStateSchemaVersion) + "; migrate the run directory first");
  }
  iteration_state s;
  s.iteration = field<int>(j, "iteration", ctx);
  s.mean_disagreement = field<double>(j, "mean_disagreement", ctx);
  s.mean_history = field<std::vector<double>>(j, "mean_history", ctx);
  s.candidate_history = field<std::vector<std::size_t>>(j, "candidate_history", ctx);
  s.budget_used = field<std::size_t>(j, "budget_used", ctx);
  s.exhausted = field<bool>(j, "exhausted", ctx);
  auto models = j.find("models");
  if (models == j.end() || !models->is_array()) throw parse_error(ctx + ": missing field 'models'");
  for (const auto& mj : *models) {
    model_history m;
    m.name = field<std::string>(mj, "name", ctx);
    m.checkpoints = field<std::vector<std::string>>(mj, "checkpoints", ctx);
    m.matrices = field<std::vector<std::string>>(mj, "matrices", ctx);
    m.dev_long_tail_f1 = field<std::vector<double>>(mj, "dev_long_tail_f1", ctx);
    s.models.push_back(std::move(m));
  }
  const auto expected = static_cast<std::size_t>(s.iteration) + 1;
  bool consistent = s.iteration >= 0 && s.mean_history.size() == expected && s.candidate_history.size() == expected;
  for (const auto& m : s.models) {
    consistent = consistent && m.checkpoints.size() == expected && m.matrices.size() == expected &&
                 m.dev_long_tail_f1.size() == expected;
  }
  if (!consistent) throw parse_error(ctx + ": histories do not match iteration " + std::to_string(s.iteration));
  return s;
}

loop_runner::loop_runner(loop_inputs inputs, loop_config cfg, fs::path run_dir)
    : inputs_(std::move(inputs)), cfg_(std::move(cfg)), run_dir_(std::move(run_dir)), pool_(cfg_.budget) {
  cfg_.validate();
  if (!inputs_.ha || !inputs_.ds || !inputs_.dev) throw argument_error("loop needs HA, DS and dev corpora");
  if (inputs_.adapters.size() != inputs_.pool.size()) {
    throw argument_error("one model adapter per pool member required");
  }
  for (const auto& a : inputs_.adapters) {
    if (!a) throw argument_error("null model adapter");
  }
  // training and target corpora are concatenated per round; titles must not collide
  std::unordered_map<std::string_view, const char*> owner;
  for (const auto& [c, name] : {std::pair{inputs_.ha.get(), "HA"}, {inputs_.ds.get(), "DS"}, {inputs_.dev.get(), "dev"}}) {
    for (const auto& doc : c->documents()) {
      auto [it, fresh] = owner.emplace(doc.title, name);
      if (!fresh) {
        throw validation_error("document title '" + doc.title + "' appears in both " + it->second + " and " + name +
                               "; titles must be unique across HA, DS and dev");
      }
    }
  }
  for (const auto& doc : inputs_.ds->documents()) {
    auto pairs = enumerate_pairs(doc);
    all_pairs_.insert(all_pairs_.end(), pairs.begin(), pairs.end());
  }
  std::sort(all_pairs_.begin(), all_pairs_.end());
  fs::create_directories(run_dir_);
  history_.resize(inputs_.pool.size());
}

loop_runner loop_runner::start(loop_inputs inputs, loop_config cfg, fs::path run_dir) {
  if (fs::exists(run_dir / "state.json")) {
    throw precondition_error("run directory " + run_dir.string() + " already holds a run; resume it instead");
  }
  loop_runner runner(std::move(inputs), std::move(cfg), std::move(run_dir));
  fs::remove(runner.run_dir_ / "pool.log");
  runner.log_ = std::make_unique<annotation_log>(runner.run_dir_ / "pool.log");
  runner.pretrain();
  return runner;
}

loop_runner loop_runner::resume(loop_inputs inputs, loop_config cfg, fs::path run_dir) {
  loop_runner runner(std::move(inputs), std::move(cfg), std::move(run_dir));
  runner.state_ = restore_state(runner.run_dir_ / "state.json");
  if (runner.state_.models.size() != runner.inputs_.pool.size()) {
    throw validation_error("checkpoint has " + std::to_string(runner.state_.models.size()) +
                           " models but the pool has " + std::to_string(runner.inputs_.pool.size()));
  }
  runner.pool_ = annotation_log::replay(runner.run_dir_ / "pool.log", runner.inputs_.schema, runner.cfg_.budget);
  if (runner.pool_.budget_used() < runner.state_.budget_used) {
    throw validation_error("annotation log is shorter than the checkpoint's budget count");
  }
  runner.log_ = std::make_unique<annotation_log>(runner.run_dir_ / "pool.log");

  for (std::size_t m = 0; m < runner.inputs_.pool.size(); ++m) {
    const auto& hist = runner.state_.models[m];
    if (hist.name != runner.inputs_.pool[m].name) {
      throw validation_error("checkpoint model '" + hist.name + "' does not match pool model '" +
                             runner.inputs_.pool[m].name + "'");
    }
    for (std::size_t it = 0; it < hist.matrices.size(); ++it) {
      runner.history_[m].push_back(ingest_predictions(runner.run_dir_ / hist.matrices[it], runner.inputs_.schema,
                                                      hist.name, static_cast<int>(it)));
    }
    runner.current_.push_back(runner.history_[m].back());
  }

  const auto open = runner.run_dir_ / "batches" / (std::to_string(runner.state_.iteration + 1) + ".jsonl");
  if (fs::exists(open)) {
    auto batch = read_sample_batch(open, runner.inputs_.schema);
    sample_batch remaining{batch.iteration, {}, false};
    for (const auto& item : batch.items) {
      if (!runner.pool_.contains(item.pair)) remaining.items.push_back(item);
    }
    runner.queue_.enqueue_batch(remaining, runner.pool_);
    runner.batch_ = std::move(batch);
  }
  return runner;
}

stop_decision loop_runner::status() const { return should_stop(state_, cfg_); }

void loop_runner::pretrain() {
  state_ = iteration_state{};
  for (const auto& member : inputs_.pool.members()) state_.models.push_back({member.name, {}, {}, {}});
  train_round(0);
  checkpoint();
}

void loop_runner::train_round(int iteration) {
  const auto augmented = training_augment(pool_, *inputs_.ha, *inputs_.ds);
  const corpus targets = concat(*inputs_.ds, *inputs_.dev, split_tag::ds);
  const std::map<std::string, relation_set> slices{{"long_tail", cfg_.sampler.long_tail}};

  struct outcome {
    prediction_matrix ds;
    double dev_f1 = 0.0;
    std::string checkpoint;
    std::string matrix;
  };

  const auto n = inputs_.pool.size();
  std::vector<std::future<outcome>> jobs;
  jobs.reserve(n);
  for (std::size_t m = 0; m < n; ++m) {
    jobs.push_back(std::async(std::launch::async, [&, m]() {
      const auto& name = inputs_.pool[m].name;
      const std::string ckpt_rel = "ckpt/" + name + "/" + std::to_string(iteration);
      const std::string matrix_rel = "matrices/" + name + "/" + std::to_string(iteration) + ".pred";
      adapter_request req;
      req.model = name;
      req.iteration = iteration;
      req.train = &augmented.train;
      req.negatives = augmented.negatives;
      req.targets = &targets;
      if (iteration > 0) req.checkpoint_in = run_dir_ / state_.models[m].checkpoints.back();
      req.checkpoint_out = run_dir_ / ckpt_rel;
      req.predictions_out = run_dir_ / ".work" / name / (std::to_string(iteration) + ".raw.pred");
      auto result = inputs_.adapters[m]->run(req, inputs_.schema);

      outcome out;
      out.ds = result.predictions.restricted_to(*inputs_.ds);
      const auto dev = result.predictions.restricted_to(*inputs_.dev);
      const auto report = evaluate(matrix_facts(dev, inputs_.pool[m].decision_threshold), *inputs_.dev, ign_index{},
                                   slices, inputs_.schema.size());
      out.dev_f1 = report.at("long_tail", averaging::micro).f1;
      write_predictions(out.ds, inputs_.schema, run_dir_ / matrix_rel);
      fs::remove(req.predictions_out);
      out.checkpoint = ckpt_rel;
      out.matrix = matrix_rel;
      return out;
    }));
  }

  std::vector<outcome> results;
  std::ostringstream failures;
  std::string diagnostics;
  for (std::size_t m = 0; m < n; ++m) {
    try {
      results.push_back(jobs[m].get());
    } catch (const adapter_error& e) {
      failures << "\n  " << inputs_.pool[m].name << ": " << e.what();
      diagnostics += "[" + inputs_.pool[m].name + "]\n" + e.diagnostics() + "\n";
    } catch (const std::exception& e) {
      failures << "\n  " << inputs_.pool[m].name << ": " << e.what();
    }
  }
  if (results.size() != n) {
    throw adapter_error("training round " + std::to_string(iteration) + " failed:" + failures.str(), diagnostics);
  }

  // Commit only after every model succeeded.
  state_.iteration = iteration;
  current_.clear();
  for (std::size_t m = 0; m < n; ++m) {
    auto& hist = state_.models[m];
    hist.checkpoints.push_back(results[m].checkpoint);
    hist.matrices.push_back(results[m].matrix);
    hist.dev_long_tail_f1.push_back(results[m].dev_f1);
    history_[m].push_back(results[m].ds);
    current_.push_back(std::move(results[m].ds));
  }
  state_.budget_used = pool_.budget_used();
  update_disagreement();
}

void loop_runner::update_disagreement() {
  const disagreement_config dcfg{cfg_.delta, inputs_.schema.size(), inputs_.pool.size()};
  const auto candidates = candidate_pairs(current_, inputs_.pool, cfg_.sampler.long_tail);
  const auto& universe = cfg_.mean_over == mean_scope::all ? all_pairs_ : candidates;
  // No candidate left means nothing to disagree on; the epsilon test then
  // ends the loop.
  state_.mean_disagreement =
      universe.empty() ? 0.0 : mean_disagreement(pair_products(current_, universe, dcfg, cfg_.threads));
  state_.mean_history.push_back(state_.mean_disagreement);
  state_.candidate_history.push_back(candidates.size());
}

void loop_runner::checkpoint() const { save_state(state_, run_dir_ / "state.json"); }

const sample_batch& loop_runner::prepare_batch() {
  if (batch_) return *batch_;
  if (status() != stop_decision::continue_loop) {
    throw precondition_error("loop has stopped (" + std::string(to_string(status())) + "); no batch to sample");
  }
  const std::size_t room = cfg_.budget - pool_.budget_used();
  const int iteration = state_.iteration + 1;
  const auto annotated = pool_.annotated_pairs();

  sample_batch batch;
  if (cfg_.selection == selection_strategy::random) {
    batch = select_random(all_pairs_, std::min(cfg_.sampler.k, room), annotated, iteration,
                          cfg_.random_seed * 1000003ULL + static_cast<std::uint64_t>(iteration));
  } else {
    const disagreement_config dcfg{cfg_.delta, inputs_.schema.size(), inputs_.pool.size()};
    const auto candidates = candidate_pairs(current_, inputs_.pool, cfg_.sampler.long_tail);
    const auto scored = score_pairs(cfg_.criterion, current_, candidates, dcfg, cfg_.threads);
    auto scfg = cfg_.sampler;
    scfg.k = std::min(scfg.k, room);
    batch = select_top_k(scored, scfg, annotated, iteration, cfg_.threads);
  }
  attach_predictions(batch, current_, inputs_.pool);

  if (batch.items.empty()) {
    state_.exhausted = true;
    checkpoint();
    throw precondition_error("no unannotated candidate pairs remain");
  }
  write_sample_batch(batch, *inputs_.ds, inputs_.schema, run_dir_ / "batches" / (std::to_string(iteration) + ".jsonl"));
  queue_.enqueue_batch(batch, pool_);
  batch_ = std::move(batch);
  return *batch_;
}

const annotation_record& loop_runner::submit(const entity_pair_key& pair, relation_set labels,
                                             const std::string& annotator) {
  const auto& record = queue_.submit(pair, std::move(labels), annotator, pool_, inputs_.schema.size());
  log_->append(record, inputs_.schema);
  return record;
}

void loop_runner::annotate_from(const annotation_source& source) {
  for (const auto& item : queue_.pending()) {
    auto labels = source.labels_for(item.pair);
    if (!labels) throw precondition_error("no annotation available for sampled pair " + to_string(item.pair));
    submit(item.pair, std::move(*labels), source.annotator());
  }
}

void loop_runner::run_iteration() {
  if (!batch_) throw precondition_error("no sampled batch to train on; prepare a batch first");
  if (!queue_.empty()) {
    std::string pending;
    for (const auto& item : queue_.pending()) pending += "\n  " + to_string(item.pair);
    throw precondition_error(std::to_string(queue_.size()) + " sampled pairs still await annotation:" + pending);
  }
  train_round(state_.iteration + 1);
  batch_.reset();
  checkpoint();
}

denoised_dataset loop_runner::finish() {
  std::vector<prediction_matrix> chosen;
  if (cfg_.aggregate_from == aggregate_source::best) {
    const auto best = best_iterations(state_);
    for (std::size_t m = 0; m < history_.size(); ++m) {
      chosen.push_back(history_[m].at(static_cast<std::size_t>(best.at(inputs_.pool[m].name))));
    }
  } else {
    chosen = current_;
  }
  auto dds = aggregate_labels(chosen, cfg_.aggregation);
  write_dds(dds, *inputs_.ds, inputs_.schema, run_dir_ / "dds" / "dds.json");
  return dds;
}

denoised_dataset loop_runner::run_batch(const annotation_source& source) {
  while (status() == stop_decision::continue_loop) {
    try {
      prepare_batch();
    } catch (const precondition_error&) {
      if (state_.exhausted) break;
      throw;
    }
    annotate_from(source);
    run_iteration();
  }
  return finish();
}

}  // namespace doremi
