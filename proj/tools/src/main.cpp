// doremi: command-line entry points for every pipeline stage.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doremi/aggregate.hpp"
#include "doremi/annotation.hpp"
#include "doremi/corpus.hpp"
#include "doremi/disagreement.hpp"
#include "doremi/error.hpp"
#include "doremi/eval.hpp"
#include "doremi/loop.hpp"
#include "doremi/predictions.hpp"
#include "doremi/sampler.hpp"
#include "doremi/service/manifest.hpp"
#include "doremi/service/server.hpp"
#include "doremi/simulation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace doremi;

namespace {

fs::path data_root() {
  const char* env = std::getenv("DOREMI_DATA_ROOT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path(".");
}

int default_port() {
  const char* env = std::getenv("DOREMI_PORT");
  if (env == nullptr || *env == '\0') return 8080;
  try {
    return std::stoi(env);
  } catch (const std::exception&) {
    throw argument_error(std::string("DOREMI_PORT is not a port number: ") + env);
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "name=path" or a bare path named after its stem.
std::pair<std::string, fs::path> model_arg(const std::string& arg) {
  auto eq = arg.find('=');
  if (eq == std::string::npos) return {fs::path(arg).stem().string(), arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

struct committee {
  model_pool pool;
  std::vector<prediction_matrix> matrices;
};

committee load_committee(const std::vector<std::string>& args, const relation_schema& schema, double threshold) {
  committee c;
  std::vector<pool_member> members;
  for (const auto& a : args) {
    auto [name, path] = model_arg(a);
    members.push_back({name, threshold});
    c.matrices.push_back(ingest_predictions(path, schema, name, 0));
  }
  c.pool = model_pool(std::move(members));
  for (const auto& w : c.pool.warnings()) std::cerr << "warning: " << w << '\n';
  return c;
}

// Long-tail set from explicit codes, else from a training corpus and threshold.
relation_set long_tail_from(const std::string& codes, const std::string& train, std::uint64_t threshold,
                            const relation_schema& schema) {
  relation_set out;
  if (!codes.empty()) {
    for (const auto& c : split_list(codes)) out.insert(schema.at(c));
    return out;
  }
  if (train.empty()) throw argument_error("give --long-tail codes or --train with --long-tail-threshold");
  return long_tail_set(relation_frequencies(load_corpus(train, split_tag::ha, schema), schema.size()), threshold);
}

std::vector<fact> load_prediction_facts(const fs::path& path, const relation_schema& schema, double threshold) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  char first = 0;
  while (in.get(first) && std::isspace(static_cast<unsigned char>(first))) {
  }
  if (first == '[') return gold_facts(load_corpus(path, split_tag::test, schema));
  return matrix_facts(ingest_predictions(path, schema, "pred", 0), threshold);
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

struct run_handle {
  service::run_manifest manifest;
  service::resolved_run resolved;
  fs::path dir;
};

run_handle open_run(const fs::path& dir) {
  run_handle h;
  h.dir = dir;
  h.manifest = service::run_manifest::load(dir / "manifest.json");
  h.resolved = service::resolve(h.manifest);
  return h;
}

void finish_or_continue(loop_runner& runner) {
  if (runner.status() == stop_decision::continue_loop) {
    try {
      runner.prepare_batch();
    } catch (const precondition_error&) {
      if (!runner.state().exhausted) throw;
    }
  }
  if (runner.status() != stop_decision::continue_loop) runner.finish();
}

// ---- subcommands ----

struct ingest_opts {
  std::string relations, input, split = "ha", output, kind = "corpus", model = "model";
  int iteration = 0;
};

int run_ingest(const ingest_opts& o) {
  const auto schema = relation_schema::load(o.relations);
  if (o.kind == "predictions") {
    const auto m = ingest_predictions(o.input, schema, o.model, o.iteration);
    if (!o.output.empty()) write_predictions(m, schema, o.output);
    print_json({{"model", m.model()}, {"pairs", m.size()}, {"entries", m.entry_count()}});
    return 0;
  }
  const auto c = load_corpus(o.input, parse_split_tag(o.split), schema);
  std::size_t pairs = 0;
  for (const auto& d : c.documents()) pairs += enumerate_pairs(d).size();
  if (!o.output.empty()) write_corpus(c, schema, o.output);
  print_json({{"split", to_string(c.tag())}, {"documents", c.size()}, {"labels", c.label_count()}, {"pairs", pairs}});
  return 0;
}

struct stats_opts {
  std::string relations, corpus, run, csv;
  std::vector<std::uint64_t> thresholds{100};
};

int run_stats(const stats_opts& o) {
  if (!o.run.empty()) {
    auto h = open_run(o.run);
    auto runner = loop_runner::resume(h.resolved.inputs, h.resolved.config, h.dir);
    print_json(service::status_json(runner, h.manifest.run_id, false));
    return 0;
  }
  if (o.corpus.empty()) throw argument_error("stats needs --corpus or --run");
  const auto schema = relation_schema::load(o.relations);
  const auto c = load_corpus(o.corpus, split_tag::ha, schema);
  const auto freq = relation_frequencies(c, schema.size());
  std::vector<relation_set> tails;
  for (auto t : o.thresholds) tails.push_back(long_tail_set(freq, t));

  std::ostringstream csv;
  csv << "code,name,count";
  for (auto t : o.thresholds) csv << ",below_" << t;
  csv << '\n';
  for (auto r : schema.relations()) {
    csv << schema.code(r) << ',' << json(schema.name(r)).dump() << ',' << freq[r];
    for (const auto& s : tails) csv << ',' << (s.contains(r) ? 1 : 0);
    csv << '\n';
  }
  if (!o.csv.empty()) {
    std::ofstream(o.csv) << csv.str();
  }
  json summary = {{"documents", c.size()}, {"labels", freq.total()}};
  json lt = json::object();
  for (std::size_t i = 0; i < o.thresholds.size(); ++i) lt[std::to_string(o.thresholds[i])] = tails[i].size();
  summary["long_tail_sizes"] = lt;
  if (o.csv.empty()) std::cout << csv.str();
  print_json(summary);
  return 0;
}

struct scoring_opts {
  std::string relations, corpus, criterion = "doremi_log", long_tail, train, out, histogram_dir;
  std::vector<std::string> preds;
  double threshold = 0.5, delta = 1e-12;
  std::uint64_t long_tail_threshold = 100;
  bool all_pairs = false;
  unsigned threads = 1;
  std::size_t bins = 10;
};

struct scored_run {
  relation_schema schema;
  corpus ds;
  committee models;
  relation_set long_tail;
  std::vector<entity_pair_key> pairs;
  std::vector<scored_pair> scores;
  disagreement_config cfg;
};

scored_run score_committee(const scoring_opts& o, bool all_pairs) {
  scored_run s;
  s.schema = relation_schema::load(o.relations);
  s.ds = load_corpus(o.corpus, split_tag::ds, s.schema);
  s.models = load_committee(o.preds, s.schema, o.threshold);
  s.cfg = {o.delta, s.schema.size(), s.models.pool.size()};
  if (all_pairs) {
    for (const auto& d : s.ds.documents()) {
      auto p = enumerate_pairs(d);
      s.pairs.insert(s.pairs.end(), p.begin(), p.end());
    }
    std::sort(s.pairs.begin(), s.pairs.end());
  } else {
    s.long_tail = long_tail_from(o.long_tail, o.train, o.long_tail_threshold, s.schema);
    s.pairs = candidate_pairs(s.models.matrices, s.models.pool, s.long_tail);
  }
  s.scores = score_pairs(parse_criterion(o.criterion), s.models.matrices, s.pairs, s.cfg, o.threads);
  return s;
}

int run_score(const scoring_opts& o) {
  const auto s = score_committee(o, o.all_pairs);
  const auto criterion = parse_criterion(o.criterion);
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    if (!out) throw io_error("cannot write " + o.out);
    out << std::setprecision(17);
    for (const auto& sp : s.scores) {
      out << json{{"title", sp.pair.doc_id}, {"h_idx", sp.pair.head}, {"t_idx", sp.pair.tail},
                  {"criterion", to_string(criterion)}, {"score", sp.score}}
                 .dump()
          << '\n';
    }
  }
  if (!o.histogram_dir.empty()) {
    for (const auto& m : s.models.matrices) {
      write_histogram_csv(compute_score_histogram(m, o.bins), fs::path(o.histogram_dir) / (m.model() + ".csv"));
    }
  }
  json summary = {{"pairs", s.pairs.size()}, {"criterion", to_string(criterion)}};
  summary["mean_disagreement"] =
      s.pairs.empty() ? json(nullptr)
                      : json(mean_disagreement(pair_products(s.models.matrices, s.pairs, s.cfg, o.threads)));
  print_json(summary);
  return 0;
}

struct sample_opts : scoring_opts {
  std::size_t k = 100;
  std::size_t max_per_doc = 0;
  std::string annotated;
  int iteration = 1;
};

int run_sample(const sample_opts& o) {
  const auto s = score_committee(o, false);
  pair_set annotated;
  if (!o.annotated.empty()) {
    for (const auto& r : read_annotations(o.annotated, s.schema)) annotated.insert(r.pair);
  }
  sampler_config cfg{o.k, s.long_tail, std::nullopt};
  if (o.max_per_doc > 0) cfg.max_per_doc = o.max_per_doc;
  auto batch = select_top_k(s.scores, cfg, annotated, o.iteration, o.threads);
  attach_predictions(batch, s.models.matrices, s.models.pool);
  if (o.out.empty()) throw argument_error("sample needs --out");
  write_sample_batch(batch, s.ds, s.schema, o.out);
  print_json({{"candidates", s.pairs.size()}, {"sampled", batch.items.size()}, {"shortfall", batch.shortfall}});
  return 0;
}

struct import_opts {
  std::string run, input, annotator;
};

int run_annotate_import(const import_opts& o) {
  auto h = open_run(o.run);
  auto runner = loop_runner::resume(h.resolved.inputs, h.resolved.config, h.dir);
  const auto records = read_annotations(o.input, h.resolved.inputs.schema);
  std::size_t accepted = 0, skipped = 0;
  for (const auto& r : records) {
    if (!runner.queue().is_pending(r.pair)) {
      ++skipped;
      continue;
    }
    runner.submit(r.pair, r.labels, o.annotator.empty() ? (r.annotator.empty() ? "import" : r.annotator) : o.annotator);
    ++accepted;
  }
  print_json({{"accepted", accepted}, {"skipped", skipped}, {"pending", runner.queue().size()}});
  return 0;
}

int run_iterate(const std::string& run) {
  auto h = open_run(run);
  auto runner = loop_runner::resume(h.resolved.inputs, h.resolved.config, h.dir);
  runner.run_iteration();
  finish_or_continue(runner);
  print_json(service::status_json(runner, h.manifest.run_id, false));
  return 0;
}

struct loop_opts {
  std::string manifest, mode = "batch", annotations, run_dir, criterion, mean_over, aggregate_from, host = "127.0.0.1",
                        token, static_dir;
  bool oracle = false, resume = false;
  std::optional<std::size_t> budget, k;
  std::optional<double> epsilon, tau;
  std::optional<unsigned> threads;
  int port = -1;
};

int serve_runner(loop_runner& runner, const std::string& run_id, const std::string& host, int port,
                 const std::string& token, const std::string& static_dir) {
  service::server_options opts;
  opts.run_id = run_id;
  if (!token.empty()) opts.token = token;
  if (!static_dir.empty()) opts.static_dir = static_dir;
  service::annotation_server server(runner, opts);
  const int bound = server.bind(host, port < 0 ? default_port() : port);
  std::cerr << "serving run " << run_id << " on http://" << host << ':' << bound << '\n';
  return server.serve() ? 0 : 1;
}

int run_loop(const loop_opts& o) {
  auto manifest = service::run_manifest::load(o.manifest);
  if (o.budget) manifest.loop.budget = *o.budget;
  if (o.k) manifest.loop.sampler.k = *o.k;
  if (o.epsilon) manifest.loop.epsilon = *o.epsilon;
  if (o.tau) manifest.loop.aggregation.tau = *o.tau;
  if (o.threads) manifest.loop.threads = *o.threads;
  if (!o.criterion.empty()) manifest.loop.criterion = parse_criterion(o.criterion);
  if (!o.mean_over.empty()) manifest.loop.mean_over = parse_mean_scope(o.mean_over);
  if (!o.aggregate_from.empty()) manifest.loop.aggregate_from = parse_aggregate_source(o.aggregate_from);
  if (!o.run_dir.empty()) manifest.run_dir = fs::absolute(o.run_dir);
  if (manifest.run_id.empty()) manifest.run_id = service::new_run_id();
  if (manifest.created.empty()) manifest.created = service::utc_timestamp();

  const auto dir = service::run_directory(manifest, data_root());
  auto resolved = service::resolve(manifest);
  for (const auto& w : resolved.config.validate()) std::cerr << "warning: " << w << '\n';
  for (const auto& w : resolved.inputs.pool.warnings()) std::cerr << "warning: " << w << '\n';

  const bool resuming = o.resume && fs::exists(dir / "state.json");
  if (resuming) {
    manifest.created = service::run_manifest::load(dir / "manifest.json").created;
  } else {
    fs::create_directories(dir);
  }
  service::pin_manifest(manifest, dir);
  auto runner = resuming ? loop_runner::resume(resolved.inputs, resolved.config, dir)
                         : loop_runner::start(resolved.inputs, resolved.config, dir);

  if (o.mode == "serve") {
    finish_or_continue(runner);
    return serve_runner(runner, manifest.run_id, o.host, o.port, o.token, o.static_dir);
  }
  if (o.mode != "batch") throw argument_error("--mode must be 'batch' or 'serve'");

  std::unique_ptr<annotation_source> source;
  if (o.oracle) {
    if (!resolved.truth) throw argument_error("--oracle needs corpora.truth in the manifest");
    source = std::make_unique<gold_annotation_source>(resolved.truth);
  } else {
    if (o.annotations.empty()) throw argument_error("batch mode needs --annotations or --oracle");
    source = std::make_unique<file_annotation_source>(read_annotations(o.annotations, resolved.inputs.schema));
  }
  const auto dds = runner.run_batch(*source);
  auto status = service::status_json(runner, manifest.run_id, false);
  status["run_dir"] = dir.string();
  status["dds_labels"] = dds.label_count();
  print_json(status);
  return 0;
}

struct aggregate_opts {
  std::string relations, corpus, out, provenance, run;
  std::vector<std::string> preds;
  double tau = 0.7;
};

int run_aggregate(const aggregate_opts& o) {
  if (!o.run.empty()) {
    auto h = open_run(o.run);
    auto runner = loop_runner::resume(h.resolved.inputs, h.resolved.config, h.dir);
    const auto dds = runner.finish();
    print_json({{"labels", dds.label_count()}, {"path", (h.dir / "dds" / "dds.json").string()}});
    return 0;
  }
  if (o.out.empty()) throw argument_error("aggregate needs --out or --run");
  const auto schema = relation_schema::load(o.relations);
  const auto ds = load_corpus(o.corpus, split_tag::ds, schema);
  std::vector<prediction_matrix> matrices;
  for (const auto& a : o.preds) {
    auto [name, path] = model_arg(a);
    matrices.push_back(ingest_predictions(path, schema, name, 0));
  }
  const auto dds = aggregate_labels(matrices, aggregation_config{o.tau});
  write_dds(dds, ds, schema, o.out, o.provenance.empty() ? std::nullopt : std::optional<fs::path>(o.provenance));
  const auto predicted = predicted_label_count(matrices);
  print_json({{"labels", dds.label_count()},
              {"predicted", predicted},
              {"retention", predicted == 0 ? 0.0 : static_cast<double>(dds.label_count()) / static_cast<double>(predicted)}});
  return 0;
}

struct merge_opts {
  std::string relations, corpus, dds, other, out, long_tail, train;
  std::uint64_t long_tail_threshold = 100;
};

int run_merge(const merge_opts& o) {
  const auto schema = relation_schema::load(o.relations);
  const auto ds = load_corpus(o.corpus, split_tag::ds, schema);
  const auto lt = long_tail_from(o.long_tail, o.train, o.long_tail_threshold, schema);
  const auto a = dds_from_corpus(load_corpus(o.dds, split_tag::ds, schema));
  const auto b = dds_from_corpus(load_corpus(o.other, split_tag::ds, schema));
  const auto merged = hybrid_merge(a, b, lt);
  write_dds(merged, ds, schema, o.out);
  print_json({{"labels", merged.label_count()}, {"long_tail_relations", lt.size()}});
  return 0;
}

struct evaluate_opts {
  std::string relations, pred, gold, train, long_tail, ign_mode = "pair", csv, jsonl;
  double threshold = 0.5;
  std::uint64_t long_tail_threshold = 100;
  std::uint64_t extreme_threshold = 0;
  bool ign_filter_gold = false;
};

int run_evaluate(const evaluate_opts& o) {
  const auto schema = relation_schema::load(o.relations);
  const auto gold = load_corpus(o.gold, split_tag::test, schema);
  const auto preds = load_prediction_facts(o.pred, schema, o.threshold);

  std::optional<corpus> train;
  if (!o.train.empty()) train = load_corpus(o.train, split_tag::ha, schema);
  std::map<std::string, relation_set> slices;
  if (!o.long_tail.empty() || train) {
    slices["long_tail"] = long_tail_from(o.long_tail, o.train, o.long_tail_threshold, schema);
  }
  if (o.extreme_threshold > 0) {
    if (!train) throw argument_error("--extreme-threshold needs --train");
    slices["extreme_long_tail"] = long_tail_set(relation_frequencies(*train, schema.size()), o.extreme_threshold);
  }

  std::vector<std::pair<std::string, ign_mode>> modes;
  if (o.ign_mode == "pair" || o.ign_mode == "both") modes.emplace_back("pair", ign_mode::pair);
  if (o.ign_mode == "fact" || o.ign_mode == "both") modes.emplace_back("fact", ign_mode::fact);
  if (modes.empty()) throw argument_error("--ign-mode must be pair, fact or both");

  for (const auto& [name, mode] : modes) {
    const auto index = train ? build_ign_index(*train, mode) : ign_index(mode);
    const auto report = evaluate(preds, gold, index, slices, schema.size(), eval_options{o.ign_filter_gold});
    const auto suffix = modes.size() > 1 ? "." + name : std::string();
    if (modes.size() > 1) std::cout << "# ign mode " << name << '\n';
    std::cout << format_report(report);
    if (!o.csv.empty()) write_report_csv(report, o.csv + suffix);
    if (!o.jsonl.empty()) write_report_jsonl(report, o.jsonl + suffix);
  }
  return 0;
}

struct serve_opts {
  std::string run, run_id, host = "127.0.0.1", token, static_dir;
  int port = -1;
};

int run_serve(const serve_opts& o) {
  fs::path dir = o.run;
  if (dir.empty()) {
    if (o.run_id.empty()) throw argument_error("serve needs --run or --run-id");
    dir = data_root() / o.run_id;
  }
  if (!fs::exists(dir / "state.json")) throw precondition_error("no loop checkpoint in " + dir.string());
  auto h = open_run(dir);
  auto runner = loop_runner::resume(h.resolved.inputs, h.resolved.config, h.dir);
  if (!runner.current_batch()) finish_or_continue(runner);
  return serve_runner(runner, h.manifest.run_id, o.host, o.port, o.token, o.static_dir);
}

struct simulate_opts {
  simulation_config cfg;
  std::size_t seeds = 10;
  std::uint64_t first_seed = 1;
  std::string criteria = "doremi_log", out, workdir;
  bool no_random = false;
};

int run_simulate(simulate_opts o) {
  o.cfg.criteria.clear();
  for (const auto& c : split_list(o.criteria)) o.cfg.criteria.push_back(parse_criterion(c));
  o.cfg.random_baseline = !o.no_random;
  std::vector<std::uint64_t> seeds(o.seeds);
  std::iota(seeds.begin(), seeds.end(), o.first_seed);
  const fs::path workdir = o.workdir.empty() ? fs::temp_directory_path() / "doremi-simulate" : fs::path(o.workdir);
  const auto runs = simulate(o.cfg, seeds, workdir);
  if (!o.out.empty()) write_simulation_csv(runs, o.out);

  std::cout << std::left << std::setw(8) << "seed" << std::setw(14) << "strategy" << std::setw(12) << "final_f1"
            << std::setw(12) << "iterations" << "mean_non_increasing\n";
  std::map<std::uint64_t, double> random_f1;
  for (const auto& r : runs) {
    if (r.strategy == "random") random_f1[r.seed] = r.final_long_tail_f1;
  }
  std::map<std::string, std::pair<int, int>> tally;  // strategy -> (>= random, monotone)
  for (const auto& r : runs) {
    std::cout << std::setw(8) << r.seed << std::setw(14) << r.strategy << std::setw(12) << std::fixed
              << std::setprecision(4) << r.final_long_tail_f1 << std::setw(12) << r.points.size() - 1
              << (r.mean_non_increasing() ? "yes" : "no") << '\n';
    auto& t = tally[r.strategy];
    if (random_f1.contains(r.seed) && r.final_long_tail_f1 >= random_f1[r.seed]) ++t.first;
    if (r.mean_non_increasing()) ++t.second;
  }
  for (const auto& [strategy, t] : tally) {
    if (strategy == "random") continue;
    std::cout << strategy << ": >= random in " << t.first << '/' << seeds.size() << " seeds, mean non-increasing in "
              << t.second << '/' << seeds.size() << '\n';
  }
  return 0;
}

int error_exit(const std::string& kind, const std::string& message, int code, const std::string& extra = {}) {
  json j = {{"error", kind}, {"message", message}};
  if (!extra.empty()) j["diagnostics"] = extra;
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disagreement-driven denoising of distantly supervised relation extraction data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "doremi 0.1.0");

  std::function<int()> action;
  auto bind = [&](CLI::App* sub, std::function<int()> fn) { sub->callback([&action, fn] { action = fn; }); };

  ingest_opts ingest;
  auto* s_ingest = app.add_subcommand("ingest", "validate a corpus or prediction file");
  s_ingest->add_option("--relations", ingest.relations, "relation schema JSON")->required();
  s_ingest->add_option("--input", ingest.input)->required();
  s_ingest->add_option("--split", ingest.split)->check(CLI::IsMember({"ha", "ds", "dev", "test"}));
  s_ingest->add_option("--kind", ingest.kind)->check(CLI::IsMember({"corpus", "predictions"}));
  s_ingest->add_option("--model", ingest.model);
  s_ingest->add_option("--iteration", ingest.iteration);
  s_ingest->add_option("--output", ingest.output, "write the normalized file here");
  bind(s_ingest, [&] { return run_ingest(ingest); });

  stats_opts stats;
  auto* s_stats = app.add_subcommand("stats", "relation frequencies and long-tail sets, or run status");
  s_stats->add_option("--relations", stats.relations);
  s_stats->add_option("--corpus", stats.corpus);
  s_stats->add_option("--threshold", stats.thresholds, "long-tail threshold (repeatable)");
  s_stats->add_option("--csv", stats.csv);
  s_stats->add_option("--run", stats.run, "run directory: print status and round statistics");
  bind(s_stats, [&] { return run_stats(stats); });

  auto add_scoring = [](CLI::App* sub, scoring_opts& o) {
    sub->add_option("--relations", o.relations)->required();
    sub->add_option("--corpus", o.corpus, "distant corpus")->required();
    sub->add_option("--pred", o.preds, "prediction file, optionally name=path (repeat per model)")->required();
    sub->add_option("--criterion", o.criterion)
        ->check(CLI::IsMember({"doremi_log", "DOREMI_LOG", "ppm", "PPM", "ppd", "PPD", "max_entropy", "MAX_ENTROPY"}));
    sub->add_option("--threshold", o.threshold, "per-model decision threshold");
    sub->add_option("--long-tail", o.long_tail, "comma-separated long-tail relation codes");
    sub->add_option("--train", o.train, "training corpus for the long-tail set");
    sub->add_option("--long-tail-threshold", o.long_tail_threshold);
    sub->add_option("--delta", o.delta);
    sub->add_option("--threads", o.threads);
    sub->add_option("--out", o.out);
  };

  scoring_opts score;
  auto* s_score = app.add_subcommand("score", "score entity pairs by committee disagreement");
  add_scoring(s_score, score);
  s_score->add_flag("--all-pairs", score.all_pairs, "score every pair instead of long-tail candidates");
  s_score->add_option("--histogram-dir", score.histogram_dir, "write per-model score histograms");
  s_score->add_option("--bins", score.bins);
  bind(s_score, [&] { return run_score(score); });

  sample_opts sample;
  auto* s_sample = app.add_subcommand("sample", "select the top-k candidate pairs");
  add_scoring(s_sample, sample);
  s_sample->add_option("--k", sample.k)->check(CLI::PositiveNumber);
  s_sample->add_option("--annotated", sample.annotated, "annotation file or pool log to exclude");
  s_sample->add_option("--iteration", sample.iteration);
  s_sample->add_option("--max-per-doc", sample.max_per_doc);
  bind(s_sample, [&] { return run_sample(sample); });

  import_opts imp;
  auto* s_import = app.add_subcommand("annotate-import", "submit offline annotations for the open batch");
  s_import->add_option("--run", imp.run)->required();
  s_import->add_option("--input", imp.input)->required();
  s_import->add_option("--annotator", imp.annotator);
  bind(s_import, [&] { return run_annotate_import(imp); });

  std::string iterate_run;
  auto* s_iterate = app.add_subcommand("iterate", "finetune on the annotated batch and sample the next one");
  s_iterate->add_option("--run", iterate_run)->required();
  bind(s_iterate, [&] { return run_iterate(iterate_run); });

  loop_opts lp;
  auto* s_loop = app.add_subcommand("loop", "run the iterative loop from a manifest");
  s_loop->add_option("--manifest", lp.manifest)->required();
  s_loop->add_option("--mode", lp.mode)->check(CLI::IsMember({"batch", "serve"}));
  s_loop->add_option("--annotations", lp.annotations);
  s_loop->add_flag("--oracle", lp.oracle, "answer from the manifest's truth corpus");
  s_loop->add_flag("--resume", lp.resume);
  s_loop->add_option("--run-dir", lp.run_dir);
  s_loop->add_option("--budget", lp.budget);
  s_loop->add_option("--k", lp.k);
  s_loop->add_option("--epsilon", lp.epsilon);
  s_loop->add_option("--tau", lp.tau);
  s_loop->add_option("--threads", lp.threads);
  s_loop->add_option("--criterion", lp.criterion);
  s_loop->add_option("--mean-over", lp.mean_over)->check(CLI::IsMember({"all", "candidates"}));
  s_loop->add_option("--aggregate-from", lp.aggregate_from)->check(CLI::IsMember({"best", "final"}));
  s_loop->add_option("--host", lp.host);
  s_loop->add_option("--port", lp.port);
  s_loop->add_option("--token", lp.token);
  s_loop->add_option("--static", lp.static_dir);
  bind(s_loop, [&] { return run_loop(lp); });

  aggregate_opts agg;
  auto* s_agg = app.add_subcommand("aggregate", "build the denoised dataset");
  s_agg->add_option("--relations", agg.relations);
  s_agg->add_option("--corpus", agg.corpus);
  s_agg->add_option("--pred", agg.preds);
  s_agg->add_option("--tau", agg.tau);
  s_agg->add_option("--out", agg.out);
  s_agg->add_option("--provenance", agg.provenance);
  s_agg->add_option("--run", agg.run, "aggregate a run's best or final iterations");
  bind(s_agg, [&] { return run_aggregate(agg); });

  merge_opts mg;
  auto* s_merge = app.add_subcommand("merge", "hybrid merge: long-tail labels from --dds, the rest from --other");
  s_merge->add_option("--relations", mg.relations)->required();
  s_merge->add_option("--corpus", mg.corpus)->required();
  s_merge->add_option("--dds", mg.dds)->required();
  s_merge->add_option("--other", mg.other)->required();
  s_merge->add_option("--out", mg.out)->required();
  s_merge->add_option("--long-tail", mg.long_tail);
  s_merge->add_option("--train", mg.train);
  s_merge->add_option("--long-tail-threshold", mg.long_tail_threshold);
  bind(s_merge, [&] { return run_merge(mg); });

  evaluate_opts ev;
  auto* s_eval = app.add_subcommand("evaluate", "precision/recall/F1 with ign variants and long-tail slices");
  s_eval->add_option("--relations", ev.relations)->required();
  s_eval->add_option("--pred", ev.pred, "prediction JSONL or DocRED-format corpus")->required();
  s_eval->add_option("--gold", ev.gold)->required();
  s_eval->add_option("--train", ev.train);
  s_eval->add_option("--threshold", ev.threshold);
  s_eval->add_option("--long-tail", ev.long_tail);
  s_eval->add_option("--long-tail-threshold", ev.long_tail_threshold);
  s_eval->add_option("--extreme-threshold", ev.extreme_threshold);
  s_eval->add_option("--ign-mode", ev.ign_mode)->check(CLI::IsMember({"pair", "fact", "both"}));
  s_eval->add_flag("--ign-filter-gold", ev.ign_filter_gold);
  s_eval->add_option("--csv", ev.csv);
  s_eval->add_option("--jsonl", ev.jsonl);
  bind(s_eval, [&] { return run_evaluate(ev); });

  serve_opts sv;
  auto* s_serve = app.add_subcommand("serve", "HTTP annotation service for an existing run");
  s_serve->add_option("--run", sv.run);
  s_serve->add_option("--run-id", sv.run_id, "run under DOREMI_DATA_ROOT");
  s_serve->add_option("--host", sv.host);
  s_serve->add_option("--port", sv.port, "defaults to DOREMI_PORT or 8080");
  s_serve->add_option("--token", sv.token, "require this bearer token");
  s_serve->add_option("--static", sv.static_dir, "serve console assets from here");
  bind(s_serve, [&] { return run_serve(sv); });

  simulate_opts sim;
  auto* s_sim = app.add_subcommand("simulate", "synthetic comparison of selection criteria");
  s_sim->add_option("--seeds", sim.seeds);
  s_sim->add_option("--first-seed", sim.first_seed);
  s_sim->add_option("--criteria", sim.criteria, "comma-separated criteria");
  s_sim->add_flag("--no-random", sim.no_random);
  s_sim->add_option("--models", sim.cfg.models);
  s_sim->add_option("--flip-rate", sim.cfg.flip_rate);
  s_sim->add_option("--confidence-mean", sim.cfg.confidence_mean);
  s_sim->add_option("--confidence-spread", sim.cfg.confidence_spread);
  s_sim->add_option("--negative-flip-scale", sim.cfg.negative_flip_scale);
  s_sim->add_option("--learning-scale", sim.cfg.learning_scale);
  s_sim->add_option("--k", sim.cfg.k);
  s_sim->add_option("--budget", sim.cfg.budget);
  s_sim->add_option("--tau", sim.cfg.tau);
  s_sim->add_option("--documents", sim.cfg.world.ds_documents, "distant documents per world");
  s_sim->add_option("--relations", sim.cfg.world.relations);
  s_sim->add_option("--long-tail", sim.cfg.world.long_tail, "number of long-tail relations");
  s_sim->add_option("--out", sim.out, "per-iteration CSV");
  s_sim->add_option("--workdir", sim.workdir);
  bind(s_sim, [&] { return run_simulate(sim); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const argument_error& e) {
    return error_exit("argument_error", e.what(), 2);
  } catch (const parse_error& e) {
    return error_exit("parse_error", e.what(), 3);
  } catch (const validation_error& e) {
    return error_exit("validation_error", e.what(), 3);
  } catch (const version_error& e) {
    return error_exit("version_error", e.what(), 3);
  } catch (const precondition_error& e) {
    return error_exit("precondition_error", e.what(), 4);
  } catch (const conflict_error& e) {
    return error_exit("conflict_error", e.what(), 4);
  } catch (const io_error& e) {
    return error_exit("io_error", e.what(), 5);
  } catch (const adapter_error& e) {
    return error_exit("adapter_error", e.what(), 6, e.diagnostics());
  } catch (const timeout_error& e) {
    return error_exit("timeout_error", e.what(), 6);
  } catch (const protocol_error& e) {
    return error_exit("protocol_error", e.what(), 6);
  } catch (const std::exception& e) {
    return error_exit("error", e.what(), 1);
  }
}
