#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "doremi/corpus.hpp"
#include "doremi/disagreement.hpp"
#include "doremi/loop.hpp"

namespace doremi {

// Generator for a small synthetic DocRE world. Relation frequencies follow a
// power law over the schema order, so the last `long_tail` relations are the
// rare ones.
struct synthetic_world_params {
  std::uint64_t seed = 0;
  std::size_t relations = 20;
  std::size_t long_tail = 5;
  std::size_t ha_documents = 60;
  std::size_t ds_documents = 200;
  std::size_t dev_documents = 60;
  int min_entities = 4;
  int max_entities = 7;
  double labelled_pair_rate = 0.2;  // share of pairs carrying at least one label
  double second_label_rate = 0.1;   // share of labelled pairs with two relations
  double zipf_exponent = 1.1;

  void validate() const;
};

struct synthetic_world {
  relation_schema schema;
  std::shared_ptr<const corpus> ha;
  std::shared_ptr<const corpus> ds;        // labels removed
  std::shared_ptr<const corpus> ds_truth;  // hidden labels of the distant split
  std::shared_ptr<const corpus> dev;
  relation_set long_tail;
};

synthetic_world make_synthetic_world(const synthetic_world_params& params);

struct simulation_config {
  synthetic_world_params world;
  std::size_t models = 5;
  double flip_rate = 0.3;
  double confidence_mean = 0.7;
  double confidence_spread = 0.2;
  double negative_flip_scale = 0.05;
  double learning_scale = 20.0;
  std::size_t k = 25;
  std::size_t budget = 100;
  double tau = 0.7;
  mean_scope mean_over = mean_scope::candidates;
  std::vector<criterion_kind> criteria{criterion_kind::doremi_log};
  bool random_baseline = true;

  void validate() const;
};

struct simulation_point {
  int iteration = 0;
  std::size_t budget_used = 0;
  double mean_disagreement = 0.0;
  std::size_t candidates = 0;
  double dev_long_tail_f1 = 0.0;  // committee mean
  double dds_long_tail_f1 = 0.0;  // aggregate of this iteration's matrices vs hidden truth
};

struct simulation_run {
  std::uint64_t seed = 0;
  std::string strategy;  // criterion name or "random"
  std::vector<simulation_point> points;
  double final_long_tail_f1 = 0.0;  // best-iteration aggregate vs hidden truth
  stop_decision stopped = stop_decision::continue_loop;

  bool mean_non_increasing() const;
};

// One run per (seed, strategy). Run directories are created under `workdir`
// and removed afterwards.
std::vector<simulation_run> simulate(const simulation_config& cfg, const std::vector<std::uint64_t>& seeds,
                                     const std::filesystem::path& workdir);

// Long-tail micro F1 of an aggregated dataset against hidden truth.
double long_tail_f1(const denoised_dataset& dds, const corpus& truth, const relation_set& long_tail,
                    std::size_t relation_count);

// seed,strategy,iteration,budget_used,mean_disagreement,candidates,dev_long_tail_f1,dds_long_tail_f1,final_long_tail_f1
void write_simulation_csv(const std::vector<simulation_run>& runs, const std::filesystem::path& path);

}  // namespace doremi
