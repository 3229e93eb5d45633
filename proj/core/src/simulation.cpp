#include "doremi/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

#include "doremi/adapter.hpp"
#include "doremi/aggregate.hpp"
#include "doremi/annotation.hpp"
#include "doremi/error.hpp"
#include "doremi/eval.hpp"
#include "json_io.hpp"

namespace doremi {
namespace {

// Uniform [0,1) from raw engine bits; std distributions differ between
// standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(unit(rng) * static_cast<double>(hi - lo + 1));
}

class relation_sampler {
 public:
  relation_sampler(std::size_t n, double exponent) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += std::pow(static_cast<double>(i + 1), -exponent);
      cumulative_.push_back(total);
    }
    for (auto& c : cumulative_) c /= total;
  }

  std::uint16_t draw(std::mt19937_64& rng) const {
    const double u = unit(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::uint16_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

document make_document(std::mt19937_64& rng, const synthetic_world_params& p, const relation_sampler& rels,
                       std::string title) {
  document doc;
  doc.title = std::move(title);
  const int n_sent = uniform_int(rng, 3, 5);
  for (int s = 0; s < n_sent; ++s) {
    std::vector<std::string> tokens;
    const int len = uniform_int(rng, 8, 14);
    for (int t = 0; t < len; ++t) tokens.push_back("w" + std::to_string(uniform_int(rng, 0, 499)));
    doc.sentences.push_back(std::move(tokens));
  }
  const int n_ent = uniform_int(rng, p.min_entities, p.max_entities);
  for (int e = 0; e < n_ent; ++e) {
    entity ent;
    ent.index = e;
    ent.type = "MISC";
    const std::string name = doc.title + "/E" + std::to_string(e);
    const int n_mentions = uniform_int(rng, 1, 2);
    for (int m = 0; m < n_mentions; ++m) {
      const int sent = uniform_int(rng, 0, n_sent - 1);
      const int len = static_cast<int>(doc.sentences[static_cast<std::size_t>(sent)].size());
      const int start = uniform_int(rng, 0, len - 2);
      ent.mentions.push_back({sent, start, start + 1, name, ent.type});
      doc.sentences[static_cast<std::size_t>(sent)][static_cast<std::size_t>(start)] = name;
    }
    doc.entities.push_back(std::move(ent));
  }
  for (int h = 0; h < n_ent; ++h) {
    for (int t = 0; t < n_ent; ++t) {
      if (h == t || unit(rng) >= p.labelled_pair_rate) continue;
      const auto first = rels.draw(rng);
      doc.labels.push_back({h, t, relation_id{first}, {}});
      if (unit(rng) < p.second_label_rate) {
        const auto second = rels.draw(rng);
        if (second != first) doc.labels.push_back({h, t, relation_id{second}, {}});
      }
    }
  }
  return doc;
}

std::shared_ptr<const corpus> make_split(std::mt19937_64& rng, const synthetic_world_params& p,
                                         const relation_sampler& rels, split_tag tag, std::size_t n) {
  std::vector<document> docs;
  docs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back(make_document(rng, p, rels,
                                 "s" + std::to_string(p.seed) + "-" + std::string(to_string(tag)) + "-" +
                                     std::to_string(i)));
  }
  return std::make_shared<const corpus>(tag, std::move(docs));
}

std::uint64_t model_seed(std::uint64_t seed, std::size_t member) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(member)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

void synthetic_world_params::validate() const {
  if (relations < 2) throw argument_error("synthetic world needs at least 2 relations");
  if (long_tail < 1 || long_tail >= relations) throw argument_error("long_tail must lie in [1, relations)");
  if (ha_documents < 1 || ds_documents < 1 || dev_documents < 1) throw argument_error("every split needs documents");
  if (min_entities < 2 || max_entities < min_entities) throw argument_error("bad entity count range");
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(labelled_pair_rate) || !prob(second_label_rate)) throw argument_error("label rates outside [0,1]");
  if (!(zipf_exponent >= 0.0)) throw argument_error("zipf_exponent must be >= 0");
}

synthetic_world make_synthetic_world(const synthetic_world_params& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  const relation_sampler rels(params.relations, params.zipf_exponent);

  synthetic_world world;
  world.schema = relation_schema::numbered(params.relations);
  world.ha = make_split(rng, params, rels, split_tag::ha, params.ha_documents);
  world.ds_truth = make_split(rng, params, rels, split_tag::ds, params.ds_documents);
  world.dev = make_split(rng, params, rels, split_tag::dev, params.dev_documents);

  std::vector<document> stripped(world.ds_truth->documents().begin(), world.ds_truth->documents().end());
  for (auto& doc : stripped) doc.labels.clear();
  world.ds = std::make_shared<const corpus>(split_tag::ds, std::move(stripped));

  for (std::size_t i = params.relations - params.long_tail; i < params.relations; ++i) {
    world.long_tail.insert(relation_id{static_cast<std::uint16_t>(i)});
  }
  return world;
}

void simulation_config::validate() const {
  world.validate();
  if (models < 2) throw argument_error("simulation needs at least 2 models");
  if (k < 1) throw argument_error("k must be >= 1");
  if (criteria.empty() && !random_baseline) throw argument_error("nothing to simulate");
  synthetic_params{0, confidence_mean, confidence_spread, flip_rate, {}, negative_flip_scale}.validate();
  aggregation_config{tau}.validate();
}

bool simulation_run::mean_non_increasing() const {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].mean_disagreement > points[i - 1].mean_disagreement) return false;
  }
  return true;
}

double long_tail_f1(const denoised_dataset& dds, const corpus& truth, const relation_set& long_tail,
                    std::size_t relation_count) {
  const auto facts = dds.facts();
  const auto report = evaluate(facts, truth, ign_index{}, {{"long_tail", long_tail}}, relation_count);
  return report.at("long_tail", averaging::micro).f1;
}

std::vector<simulation_run> simulate(const simulation_config& cfg, const std::vector<std::uint64_t>& seeds,
                                     const std::filesystem::path& workdir) {
  cfg.validate();
  std::vector<std::pair<std::string, std::optional<criterion_kind>>> strategies;
  for (auto c : cfg.criteria) strategies.emplace_back(std::string(to_string(c)), c);
  if (cfg.random_baseline) strategies.emplace_back("random", std::nullopt);

  std::vector<simulation_run> runs;
  for (auto seed : seeds) {
    auto wp = cfg.world;
    wp.seed = seed;
    const auto world = make_synthetic_world(wp);

    for (const auto& [name, criterion] : strategies) {
      loop_inputs inputs;
      inputs.schema = world.schema;
      inputs.ha = world.ha;
      inputs.ds = world.ds;
      inputs.dev = world.dev;
      std::vector<pool_member> members;
      for (std::size_t m = 0; m < cfg.models; ++m) {
        members.push_back({"m" + std::to_string(m), 0.5});
        synthetic_params base{model_seed(seed, m), cfg.confidence_mean, cfg.confidence_spread, cfg.flip_rate, {},
                              cfg.negative_flip_scale};
        inputs.adapters.push_back(
            std::make_shared<synthetic_adapter>(base, synthetic_learning{cfg.learning_scale}, world.ds_truth));
      }
      inputs.pool = model_pool(std::move(members));

      loop_config lc;
      lc.budget = cfg.budget;
      lc.sampler.k = cfg.k;
      lc.sampler.long_tail = world.long_tail;
      lc.mean_over = cfg.mean_over;
      lc.aggregation.tau = cfg.tau;
      if (criterion) {
        lc.criterion = *criterion;
      } else {
        lc.selection = selection_strategy::random;
        lc.random_seed = seed;
      }

      const auto run_dir = workdir / ("seed" + std::to_string(seed) + "-" + name);
      std::filesystem::remove_all(run_dir);
      simulation_run run;
      run.seed = seed;
      run.strategy = name;
      {
        auto runner = loop_runner::start(inputs, lc, run_dir);
        const auto dds = runner.run_batch(gold_annotation_source(world.ds_truth));
        run.stopped = runner.status();
        run.final_long_tail_f1 = long_tail_f1(dds, *world.ds_truth, world.long_tail, world.schema.size());

        const auto& st = runner.state();
        const auto& history = runner.matrix_history();
        for (int it = 0; it <= st.iteration; ++it) {
          simulation_point pt;
          pt.iteration = it;
          for (const auto& rec : runner.pool().records()) pt.budget_used += rec.iteration <= it ? 1 : 0;
          pt.mean_disagreement = st.mean_history[static_cast<std::size_t>(it)];
          pt.candidates = st.candidate_history[static_cast<std::size_t>(it)];
          std::vector<prediction_matrix> at_iteration;
          for (std::size_t m = 0; m < history.size(); ++m) {
            pt.dev_long_tail_f1 += st.models[m].dev_long_tail_f1[static_cast<std::size_t>(it)];
            at_iteration.push_back(history[m][static_cast<std::size_t>(it)]);
          }
          pt.dev_long_tail_f1 /= static_cast<double>(history.size());
          pt.dds_long_tail_f1 = long_tail_f1(aggregate_labels(at_iteration, lc.aggregation), *world.ds_truth,
                                             world.long_tail, world.schema.size());
          run.points.push_back(pt);
        }
      }
      std::filesystem::remove_all(run_dir);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

void write_simulation_csv(const std::vector<simulation_run>& runs, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "seed,strategy,iteration,budget_used,mean_disagreement,candidates,dev_long_tail_f1,dds_long_tail_f1,"
         "final_long_tail_f1\n"
      << std::setprecision(10);
  for (const auto& run : runs) {
    for (const auto& pt : run.points) {
      out << run.seed << ',' << run.strategy << ',' << pt.iteration << ',' << pt.budget_used << ','
          << pt.mean_disagreement << ',' << pt.candidates << ',' << pt.dev_long_tail_f1 << ','
          << pt.dds_long_tail_f1 << ',' << run.final_long_tail_f1 << '\n';
    }
  }
  detail::write_file_atomic(path, out.str());
}

}  // namespace doremi
