#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "doremi/disagreement.hpp"
#include "doremi/sampler.hpp"

using namespace doremi;

namespace {

struct committee {
  std::vector<prediction_matrix> models;
  std::vector<entity_pair_key> pairs;
};

// `pairs` pairs, 96 relations, about 8 stored scores per row.
committee make_committee(std::size_t models, std::size_t pairs) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> relation(0, 95);
  std::uniform_real_distribution<double> prob(0.0, 1.0);
  committee c;
  for (std::size_t p = 0; p < pairs; ++p) c.pairs.push_back({"doc" + std::to_string(p / 400), int(p % 400), 400});
  for (std::size_t m = 0; m < models; ++m) {
    std::vector<prediction_row> rows;
    for (const auto& key : c.pairs) {
      prediction_row row{key, {}};
      std::vector<bool> used(96);
      for (int i = 0; i < 8; ++i) {
        const int r = relation(rng);
        if (used[r]) continue;
        used[r] = true;
        row.scores.push_back({relation_id{static_cast<std::uint16_t>(r)}, prob(rng)});
      }
      rows.push_back(std::move(row));
    }
    c.models.emplace_back("m" + std::to_string(m), 0, std::move(rows));
  }
  return c;
}

void BM_relation_disagreement(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> prob(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(state.range(0)));
  for (auto& x : p) x = prob(rng);
  for (auto _ : state) benchmark::DoNotOptimize(relation_disagreement(p));
}
BENCHMARK(BM_relation_disagreement)->Arg(3)->Arg(5)->Arg(9);

void BM_score_pairs(benchmark::State& state) {
  const auto c = make_committee(5, static_cast<std::size_t>(state.range(0)));
  const disagreement_config cfg{1e-12, 96, 5};
  const auto kind = static_cast<criterion_kind>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(score_pairs(kind, c.models, c.pairs, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_score_pairs)
    ->Args({10000, static_cast<long>(criterion_kind::doremi_log)})
    ->Args({10000, static_cast<long>(criterion_kind::ppm)})
    ->Args({10000, static_cast<long>(criterion_kind::max_entropy)})
    ->Unit(benchmark::kMillisecond);

void BM_select_top_k(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> score(-50.0, 0.0);
  std::vector<scored_pair> scored;
  for (long i = 0; i < state.range(0); ++i) scored.push_back({{"d" + std::to_string(i / 400), int(i % 400), 400}, score(rng)});
  const sampler_config cfg{static_cast<std::size_t>(state.range(1)), {relation_id{0}}, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(select_top_k(scored, cfg, {}, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_select_top_k)->Args({100000, 100})->Args({100000, 300})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
