#include "doremi/service/manifest.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "doremi/error.hpp"

namespace doremi::service {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T>
T get_or(const json& obj, const char* name, T fallback) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw parse_error(std::string("manifest field '") + name + "' has the wrong type");
  }
}

fs::path resolve_path(const json& obj, const char* name, const fs::path& base, bool required) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) {
    if (required) throw parse_error(std::string("manifest is missing '") + name + "'");
    return {};
  }
  if (!it->is_string()) throw parse_error(std::string("manifest field '") + name + "' must be a path string");
  fs::path p = it->get<std::string>();
  return p.is_absolute() ? p : fs::weakly_canonical(base / p);
}

json model_to_json(const model_entry& m) {
  json j = {{"name", m.member.name}, {"threshold", m.member.decision_threshold}};
  if (m.command) {
    j["command"] = m.command->command;
    j["workdir"] = m.command->workdir.string();
    j["timeout"] = m.command->timeout.count();
  }
  if (m.synthetic) {
    const auto& s = *m.synthetic;
    j["synthetic"] = {{"seed", s.seed},
                      {"confidence_mean", s.confidence_mean},
                      {"confidence_spread", s.confidence_spread},
                      {"flip_rate", s.flip_rate},
                      {"negative_flip_scale", s.negative_flip_scale},
                      {"learning_scale", m.learning_scale}};
  }
  return j;
}

model_entry model_from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw parse_error("manifest model entries must be objects");
  model_entry m;
  m.member.name = get_or<std::string>(j, "name", "");
  if (m.member.name.empty()) throw parse_error("manifest model entry without a name");
  m.member.decision_threshold = get_or<double>(j, "threshold", 0.5);
  if (j.contains("command")) {
    adapter_spec spec;
    spec.command = get_or<std::vector<std::string>>(j, "command", {});
    spec.workdir = resolve_path(j, "workdir", base, false);
    if (spec.workdir.empty()) spec.workdir = base;
    spec.timeout = std::chrono::seconds(get_or<std::int64_t>(j, "timeout", 3600));
    m.command = std::move(spec);
  }
  if (auto it = j.find("synthetic"); it != j.end()) {
    synthetic_params s;
    s.seed = get_or<std::uint64_t>(*it, "seed", 0);
    s.confidence_mean = get_or<double>(*it, "confidence_mean", 0.7);
    s.confidence_spread = get_or<double>(*it, "confidence_spread", 0.2);
    s.flip_rate = get_or<double>(*it, "flip_rate", 0.3);
    s.negative_flip_scale = get_or<double>(*it, "negative_flip_scale", 1.0);
    m.learning_scale = get_or<double>(*it, "learning_scale", 20.0);
    m.synthetic = s;
  }
  if (m.command.has_value() == m.synthetic.has_value()) {
    throw parse_error("model '" + m.member.name + "' needs exactly one of 'command' or 'synthetic'");
  }
  return m;
}

}  // namespace

json run_manifest::to_json() const {
  json models_j = json::array();
  for (const auto& m : models) models_j.push_back(model_to_json(m));
  json corpora = {{"ha", ha.string()}, {"ds", ds.string()}, {"dev", dev.string()}};
  if (truth) corpora["truth"] = truth->string();
  json lp = {{"epsilon", loop.epsilon},
             {"budget", loop.budget},
             {"k", loop.sampler.k},
             {"criterion", to_string(loop.criterion)},
             {"mean_over", to_string(loop.mean_over)},
             {"aggregate_from", to_string(loop.aggregate_from)},
             {"tau", loop.aggregation.tau},
             {"delta", loop.delta},
             {"selection", loop.selection == selection_strategy::random ? "random" : "disagreement"},
             {"seed", loop.random_seed},
             {"threads", loop.threads},
             {"long_tail_threshold", long_tail_threshold}};
  lp["max_per_doc"] = loop.sampler.max_per_doc ? json(*loop.sampler.max_per_doc) : json(nullptr);
  if (!long_tail_codes.empty()) lp["long_tail"] = long_tail_codes;
  json j = {{"run_id", run_id},  {"created", created}, {"relations", relations.string()},
            {"corpora", corpora}, {"models", models_j}, {"loop", lp}};
  if (run_dir) j["run_dir"] = run_dir->string();
  return j;
}

run_manifest run_manifest::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw parse_error("manifest must be a JSON object");
  run_manifest m;
  m.run_id = get_or<std::string>(j, "run_id", "");
  m.created = get_or<std::string>(j, "created", "");
  m.relations = resolve_path(j, "relations", base_dir, true);
  auto corpora = j.find("corpora");
  if (corpora == j.end() || !corpora->is_object()) throw parse_error("manifest is missing 'corpora'");
  m.ha = resolve_path(*corpora, "ha", base_dir, true);
  m.ds = resolve_path(*corpora, "ds", base_dir, true);
  m.dev = resolve_path(*corpora, "dev", base_dir, true);
  if (auto t = resolve_path(*corpora, "truth", base_dir, false); !t.empty()) m.truth = t;

  auto models = j.find("models");
  if (models == j.end() || !models->is_array()) throw parse_error("manifest is missing 'models'");
  for (const auto& mj : *models) m.models.push_back(model_from_json(mj, base_dir));

  const json lp = j.value("loop", json::object());
  m.loop.epsilon = get_or<double>(lp, "epsilon", 0.0);
  m.loop.budget = get_or<std::size_t>(lp, "budget", 400);
  m.loop.sampler.k = get_or<std::size_t>(lp, "k", 100);
  m.loop.criterion = parse_criterion(get_or<std::string>(lp, "criterion", "doremi_log"));
  m.loop.mean_over = parse_mean_scope(get_or<std::string>(lp, "mean_over", "candidates"));
  m.loop.aggregate_from = parse_aggregate_source(get_or<std::string>(lp, "aggregate_from", "best"));
  m.loop.aggregation.tau = get_or<double>(lp, "tau", 0.7);
  m.loop.delta = get_or<double>(lp, "delta", 1e-12);
  const auto selection = get_or<std::string>(lp, "selection", "disagreement");
  if (selection != "disagreement" && selection != "random") throw parse_error("loop.selection must be 'disagreement' or 'random'");
  m.loop.selection = selection == "random" ? selection_strategy::random : selection_strategy::disagreement;
  m.loop.random_seed = get_or<std::uint64_t>(lp, "seed", 0);
  m.loop.threads = get_or<unsigned>(lp, "threads", 1);
  if (auto it = lp.find("max_per_doc"); it != lp.end() && !it->is_null()) {
    m.loop.sampler.max_per_doc = get_or<std::size_t>(lp, "max_per_doc", 0);
  }
  m.long_tail_threshold = get_or<std::uint64_t>(lp, "long_tail_threshold", 100);
  m.long_tail_codes = get_or<std::vector<std::string>>(lp, "long_tail", {});
  if (auto rd = resolve_path(j, "run_dir", base_dir, false); !rd.empty()) m.run_dir = rd;
  return m;
}

run_manifest run_manifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

void run_manifest::save(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw io_error("cannot write " + tmp.string());
    out << to_json().dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

resolved_run resolve(const run_manifest& manifest) {
  if (manifest.models.size() < 2) throw argument_error("the model pool needs at least two models");
  resolved_run out;
  auto& in = out.inputs;
  in.schema = relation_schema::load(manifest.relations);
  in.ha = std::make_shared<const corpus>(load_corpus(manifest.ha, split_tag::ha, in.schema));
  in.ds = std::make_shared<const corpus>(load_corpus(manifest.ds, split_tag::ds, in.schema));
  in.dev = std::make_shared<const corpus>(load_corpus(manifest.dev, split_tag::dev, in.schema));
  if (manifest.truth) {
    out.truth = std::make_shared<const corpus>(load_corpus(*manifest.truth, split_tag::ds, in.schema));
  }

  std::vector<pool_member> members;
  for (const auto& m : manifest.models) {
    members.push_back(m.member);
    if (m.command) {
      in.adapters.push_back(std::make_shared<subprocess_adapter>(*m.command));
    } else {
      in.adapters.push_back(std::make_shared<synthetic_adapter>(
          *m.synthetic, synthetic_learning{m.learning_scale}, out.truth ? out.truth : in.ds));
    }
  }
  in.pool = model_pool(std::move(members));

  out.config = manifest.loop;
  if (manifest.long_tail_codes.empty()) {
    out.config.sampler.long_tail =
        long_tail_set(relation_frequencies(*in.ha, in.schema.size()), manifest.long_tail_threshold);
  } else {
    for (const auto& code : manifest.long_tail_codes) out.config.sampler.long_tail.insert(in.schema.at(code));
  }
  return out;
}

fs::path run_directory(const run_manifest& manifest, const fs::path& data_root) {
  if (manifest.run_dir) return *manifest.run_dir;
  if (manifest.run_id.empty()) throw argument_error("manifest has neither run_dir nor run_id");
  return data_root / manifest.run_id;
}

void pin_manifest(const run_manifest& manifest, const fs::path& run_dir) {
  const auto path = run_dir / "manifest.json";
  if (!fs::exists(path)) {
    manifest.save(path);
    return;
  }
  auto stored = run_manifest::load(path).to_json();
  auto current = manifest.to_json();
  stored.erase("created");
  current.erase("created");
  if (stored != current) {
    throw conflict_error(path.string() + " describes a different configuration; manifests are immutable once written");
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string new_run_id() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << "run-" << std::put_time(&tm, "%Y%m%dT%H%M%S") << '-' << std::hex << std::setw(4) << std::setfill('0')
      << (std::random_device{}() & 0xFFFFU);
  return out.str();
}

}  // namespace doremi::service
