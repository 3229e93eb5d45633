#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doremi/adapter.hpp"
#include "doremi/loop.hpp"
#include "doremi/synthetic.hpp"

namespace doremi::service {

// One committee member: either an external command or the in-process
// synthetic model.
struct model_entry {
  pool_member member;
  std::optional<adapter_spec> command;
  std::optional<synthetic_params> synthetic;
  double learning_scale = 20.0;
};

// Everything needed to start or resume a run. Relative paths are resolved
// against the manifest's directory when loaded.
struct run_manifest {
  std::string run_id;
  std::string created;  // ISO-8601, UTC

  std::filesystem::path relations;
  std::filesystem::path ha;
  std::filesystem::path ds;
  std::filesystem::path dev;
  std::optional<std::filesystem::path> truth;  // hidden DS labels for synthetic models and the oracle annotator

  std::vector<model_entry> models;
  loop_config loop;
  std::uint64_t long_tail_threshold = 100;
  std::vector<std::string> long_tail_codes;  // explicit set; overrides the threshold

  std::optional<std::filesystem::path> run_dir;

  nlohmann::json to_json() const;
  static run_manifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static run_manifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct resolved_run {
  loop_inputs inputs;
  loop_config config;
  std::shared_ptr<const corpus> truth;  // null when the manifest names none
};

// Loads corpora, resolves the long-tail set and builds one adapter per model.
resolved_run resolve(const run_manifest& manifest);

// Directory for a run: the manifest's run_dir, else <data_root>/<run_id>.
std::filesystem::path run_directory(const run_manifest& manifest, const std::filesystem::path& data_root);

// Writes run_dir/manifest.json on first use; later calls require the stored
// snapshot to describe the same configuration.
void pin_manifest(const run_manifest& manifest, const std::filesystem::path& run_dir);

std::string utc_timestamp();
std::string new_run_id();

}  // namespace doremi::service
