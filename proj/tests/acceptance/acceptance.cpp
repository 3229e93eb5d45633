// Acceptance checks A1-A12. One PASS/FAIL line each; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "doremi/aggregate.hpp"
#include "doremi/disagreement.hpp"
#include "doremi/eval.hpp"
#include "doremi/loop.hpp"
#include "doremi/sampler.hpp"
#include "doremi/simulation.hpp"
#include "eval_oracle.hpp"
#include "http_driver.hpp"
#include "loop_fixture.hpp"
#include "support.hpp"

using namespace doremi;
using namespace doremi::testing;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kOracleTol = 1e-12;
constexpr double kFastLimitSeconds = 5.0;
constexpr double kSimulationLimitSeconds = 180.0;
constexpr int kSimulationSeeds = 10;
constexpr int kSimulationRequired = 8;
constexpr double kDelta = 1e-12;

struct outcome {
  bool pass = true;
  std::ostringstream note;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (!pass) note << "; ";
      pass = false;
      note << what;
    }
  }
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::vector<prediction_matrix> committee(const std::vector<prob_table>& pairs) {
  std::vector<prediction_matrix> out;
  for (std::size_t m = 0; m < pairs[0].size(); ++m) {
    score_map scores;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      auto& row = scores[{"doc" + std::to_string(p / 40), static_cast<int>(p % 40), 40}];
      for (std::size_t r = 0; r < pairs[p][m].size(); ++r)
        if (pairs[p][m][r] > 0.0) row[static_cast<int>(r)] = pairs[p][m][r];
    }
    out.push_back(make_matrix("m" + std::to_string(m), scores));
  }
  return out;
}

std::vector<entity_pair_key> committee_keys(std::size_t n) {
  std::vector<entity_pair_key> out;
  for (std::size_t p = 0; p < n; ++p) out.push_back({"doc" + std::to_string(p / 40), static_cast<int>(p % 40), 40});
  return out;
}

std::vector<entity_pair_key> top_pairs(const std::vector<scored_pair>& scored, std::size_t k) {
  const auto batch = select_top_k(scored, sampler_config{k, {rel(0)}, std::nullopt}, {}, 1);
  std::vector<entity_pair_key> out;
  for (const auto& it : batch.items) out.push_back(it.pair);
  return out;
}

// ---- A1 ----
outcome a1() {
  outcome o;
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t n : {2U, 3U, 5U}) {
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> p(n);
      for (auto& x : p) x = unit(rng);
      worst = std::max(worst, std::abs(relation_disagreement(p) - brute_disagreement(p)));
    }
  }
  const double secs = seconds_since(t0);
  o.require(worst <= kOracleTol, "max abs error above tolerance");
  o.require(secs < kFastLimitSeconds, "too slow");
  o.note << (o.pass ? "" : "; ") << "max_abs_err=" << worst << " time=" << secs << "s";
  return o;
}

// ---- A2 ----
outcome a2() {
  outcome o;
  const double unanimous = relation_disagreement(std::vector<double>{1, 1, 1, 1, 1});
  const double split = relation_disagreement(std::vector<double>{1.0, 0.0});
  const double half = relation_disagreement(std::vector<double>{0.5, 0.5, 0.5, 0.5, 0.5});
  o.require(unanimous == 0.0, "unanimous != 0");
  o.require(split == 1.0, "certain split != 1");
  o.require(half == 0.9375, "five halves != 0.9375");
  o.note << (o.pass ? "" : "; ") << "unanimous=" << unanimous << " split=" << split << " half5=" << half;
  return o;
}

// ---- A3 ----
outcome a3() {
  outcome o;
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(303);
  // probabilities in [0.05, 0.95] keep every phi well above 1e-6
  std::uniform_int_distribution<int> grid(50, 950);
  std::vector<prob_table> pairs;
  for (int p = 0; p < 500; ++p) {
    prob_table t(3, std::vector<double>(6));
    for (auto& m : t)
      for (auto& x : m) x = grid(rng) / 1000.0;
    pairs.push_back(t);
  }
  const auto ms = committee(pairs);
  const auto keys = committee_keys(pairs.size());
  const disagreement_config cfg{kDelta, 6, 3};
  const auto psi = score_pairs(criterion_kind::doremi_log, ms, keys, cfg);
  const auto products = pair_products(ms, keys, cfg);
  double min_phi = 1.0;
  std::vector<scored_pair> by_product, by_oracle;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    by_product.push_back({keys[i], products[i]});
    by_oracle.push_back({keys[i], oracle_product(pairs[i])});
    for (double v : pair_disagreement(ms, keys[i], cfg).per_relation) min_phi = std::min(min_phi, v);
  }
  o.require(min_phi > 1e-6, "fixture has phi <= 1e-6");
  for (std::size_t k : {1U, 10U, 50U}) {
    const auto a = top_pairs(psi, k);
    o.require(a == top_pairs(by_product, k), "log vs product top-" + std::to_string(k) + " differ");
    o.require(a == top_pairs(by_oracle, k), "log vs oracle product top-" + std::to_string(k) + " differ");
  }
  const double secs = seconds_since(t0);
  o.require(secs < kFastLimitSeconds, "too slow");
  o.note << (o.pass ? "" : "; ") << "k={1,10,50} min_phi=" << min_phi << " time=" << secs << "s";
  return o;
}

// ---- A4 ----
outcome a4() {
  outcome o;
  std::mt19937_64 rng(404);
  std::vector<scored_pair> scored;
  for (int i = 0; i < 2000; ++i) {
    scored.push_back({{"d" + std::to_string(i % 97), i / 97, 100 + i % 7},
                      -static_cast<double>(std::uniform_int_distribution<int>(0, 300)(rng)) / 7.0});
  }
  pair_set annotated;
  for (int i = 0; i < 2000; i += 3) annotated.insert(scored[static_cast<std::size_t>(i)].pair);
  const sampler_config cfg{100, {rel(0)}, std::nullopt};
  const auto reference = select_top_k(scored, cfg, annotated, 1);
  o.require(reference.items.size() == 100, "batch size != k");
  for (int rep = 0; rep < 20; ++rep) {
    auto shuffled = scored;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const unsigned shards = 1 + static_cast<unsigned>(rep % 8);
    o.require(select_top_k(shuffled, cfg, annotated, 1, shards) == reference,
              "batch differs for shuffle/shard " + std::to_string(rep));
  }
  for (const auto& it : reference.items) o.require(!annotated.contains(it.pair), "annotated pair sampled");

  std::vector<scored_pair> few(scored.begin(), scored.begin() + 12);
  const auto shortfall = select_top_k(few, sampler_config{50, {rel(0)}, std::nullopt}, annotated, 1, 3);
  std::size_t eligible = 0;
  for (const auto& s : few) eligible += !annotated.contains(s.pair);
  o.require(shortfall.shortfall, "shortfall flag not set");
  o.require(shortfall.items.size() == eligible, "shortfall batch does not hold every eligible pair");
  o.note << (o.pass ? "" : "; ") << "20 shuffled/sharded repeats identical, shortfall " << shortfall.items.size()
         << "/50";
  return o;
}

// ---- A5 ----
struct loop_arith {
  int iterations = 0;
  std::size_t max_used = 0;
  std::size_t final_used = 0;
  stop_decision stop = stop_decision::continue_loop;
};

loop_arith run_arith(std::size_t k, std::size_t budget, std::size_t ds_docs, const std::string& name) {
  auto w = make_loop_world(55, 3, ds_docs, 0.3, 1.0);
  w.config.sampler.k = k;
  w.config.budget = budget;
  auto runner = loop_runner::start(w.inputs, w.config, scratch(name));
  const gold_annotation_source oracle(w.world.ds_truth);
  loop_arith out;
  while (runner.status() == stop_decision::continue_loop) {
    runner.prepare_batch();
    runner.annotate_from(oracle);
    out.max_used = std::max(out.max_used, runner.pool().budget_used());
    runner.run_iteration();
  }
  runner.finish();
  out.iterations = runner.state().iteration;
  out.final_used = runner.pool().budget_used();
  out.stop = runner.status();
  return out;
}

outcome a5() {
  outcome o;
  const auto small = run_arith(100, 400, 200, "a5_docred");
  const auto large = run_arith(300, 1200, 300, "a5_redocred");
  o.require(small.iterations == 4, "k=100/b=400 ran " + std::to_string(small.iterations) + " iterations");
  o.require(small.max_used <= 400 && small.final_used == 400, "k=100/b=400 budget accounting off");
  o.require(small.stop == stop_decision::stop_budget, "k=100/b=400 did not stop on budget");
  o.require(large.iterations == 4, "k=300/b=1200 ran " + std::to_string(large.iterations) + " iterations");
  o.require(large.max_used <= 1200 && large.final_used == 1200, "k=300/b=1200 budget accounting off");
  o.require(large.stop == stop_decision::stop_budget, "k=300/b=1200 did not stop on budget");
  o.note << (o.pass ? "" : "; ") << "k=100,b=400: " << small.iterations << " iterations, used " << small.final_used
         << "; k=300,b=1200: " << large.iterations << " iterations, used " << large.final_used;
  return o;
}

// ---- A6 ----
outcome a6() {
  outcome o;
  const auto t0 = clock_type::now();
  const aggregation_config tau{0.7};
  {
    const auto kept = aggregate_labels(std::vector{make_matrix("a", {{{"d", 0, 1}, {{0, 0.71}}}}),
                                                   make_matrix("b", {{{"d", 0, 1}, {{0, 0.2}}}})},
                                       tau);
    const auto dropped = aggregate_labels(std::vector{make_matrix("a", {{{"d", 0, 1}, {{0, 0.70}}}}),
                                                      make_matrix("b", {{{"d", 0, 1}, {{0, 0.70}}}})},
                                          tau);
    o.require(kept.label_count() == 1, "0.71 not retained");
    o.require(dropped.label_count() == 0, "0.70 retained");
  }
  std::mt19937_64 rng(606);
  std::vector<score_map> maps(3);
  std::set<std::tuple<std::string, int, int, int>> labels;
  while (labels.size() < 10000) {
    const int p = std::uniform_int_distribution<int>(0, 4999)(rng);
    const auto key = std::make_tuple("d" + std::to_string(p / 50), p % 50, 50);
    const int r = std::uniform_int_distribution<int>(0, 9)(rng);
    if (!labels.insert({std::get<0>(key), std::get<1>(key), 50, r}).second) continue;
    bool any = false;
    for (auto& m : maps) {
      if (std::bernoulli_distribution(0.6)(rng)) {
        m[key][r] = grid_prob(rng);
        any = true;
      }
    }
    if (!any) maps[0][key][r] = grid_prob(rng);
  }
  std::vector<prediction_matrix> ms;
  for (std::size_t i = 0; i < maps.size(); ++i) ms.push_back(make_matrix("m" + std::to_string(i), maps[i]));
  auto oracle_at = [&](double t) {
    std::set<fact> out;
    for (const auto& [doc, h, tl, r] : labels) {
      double best = 0.0;
      for (const auto& m : maps) {
        auto it = m.find({doc, h, tl});
        if (it == m.end()) continue;
        auto jt = it->second.find(r);
        if (jt != it->second.end()) best = std::max(best, jt->second);
      }
      if (best > t) out.insert({{doc, h, tl}, rel(static_cast<std::uint16_t>(r))});
    }
    return out;
  };
  const auto got = aggregate_labels(ms, tau).facts();
  const auto expected = oracle_at(0.7);
  o.require(std::set<fact>(got.begin(), got.end()) == expected, "retained set differs from max-scan oracle");
  o.require(predicted_label_count(ms) == labels.size(), "stored label count differs");

  std::uniform_real_distribution<double> unit(0.01, 0.99);
  for (int i = 0; i < 20; ++i) {
    double lo = unit(rng), hi = unit(rng);
    if (lo > hi) std::swap(lo, hi);
    const auto a = aggregate_labels(ms, {lo}).facts();
    const auto b = aggregate_labels(ms, {hi}).facts();
    o.require(std::includes(a.begin(), a.end(), b.begin(), b.end()), "tau monotonicity broken");
  }
  const double secs = seconds_since(t0);
  o.require(secs < kFastLimitSeconds, "too slow");
  o.note << (o.pass ? "" : "; ") << "10000 labels, retained " << expected.size() << ", 20 tau pairs, time=" << secs
         << "s";
  return o;
}

// ---- A7 ----
outcome a7() {
  outcome o;
  std::mt19937_64 rng(707);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    relation_set lt;
    for (std::uint16_t r = 0; r < 8; ++r)
      if (std::bernoulli_distribution(0.4)(rng)) lt.insert(rel(r));
    denoised_dataset dds, other;
    std::set<fact> a, b;
    for (int i = 0; i < 60; ++i) {
      fact f{{"d" + std::to_string(i % 5), i % 4, 4 + i % 3}, rel(static_cast<std::uint16_t>(i % 8))};
      if (std::bernoulli_distribution(0.5)(rng)) dds.insert(f), a.insert(f);
      if (std::bernoulli_distribution(0.5)(rng)) other.insert(f), b.insert(f);
    }
    std::set<fact> expected;
    for (const auto& f : a)
      if (lt.contains(f.relation)) expected.insert(f);
    for (const auto& f : b)
      if (!lt.contains(f.relation)) expected.insert(f);
    const auto merged = hybrid_merge(dds, other, lt).facts();
    o.require(std::set<fact>(merged.begin(), merged.end()) == expected, "set-algebra mismatch");
    for (const auto& f : merged) {
      const bool from_dds = a.contains(f) && lt.contains(f.relation);
      const bool from_other = b.contains(f) && !lt.contains(f.relation);
      o.require(from_dds != from_other, "label source not determined by relation class");
      ++checked;
    }
  }
  o.note << (o.pass ? "" : "; ") << "100 fixtures, " << checked << " labels checked";
  return o;
}

// ---- A8 ----
outcome a8() {
  outcome o;
  std::mt19937_64 rng(808);
  const std::set<int> full{0, 1, 2, 3, 4}, tail{3, 4};
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_eval_instance(rng, 5);
    const auto report = evaluate(to_facts(inst.pred), inst.gold, build_ign_index(inst.train, ign_mode::pair),
                                 {{"long_tail", {rel(3), rel(4)}}}, 5);
    for (const auto& [slice, rels] : {std::pair{"full", full}, std::pair{"long_tail", tail}}) {
      o.require(close(report.at(slice, averaging::micro), brute_metrics(inst.pred, inst.gold, &inst.train, rels, false)),
                std::string("micro ") + slice + " mismatch in trial " + std::to_string(trial));
      o.require(close(report.at(slice, averaging::macro), brute_metrics(inst.pred, inst.gold, &inst.train, rels, true)),
                std::string("macro ") + slice + " mismatch in trial " + std::to_string(trial));
    }
  }
  const auto schema = relation_schema::load(fixture("relations.json"));
  const auto gold = load_corpus(fixture("three_docs.json"), split_tag::test, schema);
  const auto pred = matrix_facts(ingest_predictions(fixture("three_docs.pred.jsonl"), schema, "p", 0), 0.5);
  const auto m = evaluate(pred, gold, ign_index(), {}, schema.size()).at("full", averaging::micro);
  o.require(std::abs(m.precision - 0.6) <= kOracleTol, "fixture P != 0.6");
  o.require(std::abs(m.recall - 0.5) <= kOracleTol, "fixture R != 0.5");
  o.require(std::abs(m.f1 - 6.0 / 11.0) <= kOracleTol, "fixture F1 != 6/11");
  o.note << (o.pass ? "" : "; ") << "50 random instances; fixture P=" << m.precision << " R=" << m.recall
         << " F1=" << m.f1;
  return o;
}

// ---- A9 ----
// Frequency tables built to match the stated corpus statistics.
frequency_table docred_like() {
  frequency_table f(96);
  std::size_t r = 0;
  for (std::uint64_t c : {7000, 5000, 4000, 3090}) f.counts[r++] = c;  // four relations, half the examples
  for (int i = 0; i < 61; ++i) f.counts[r++] = 287 + (i < 33 ? 1 : 0);
  for (int i = 0; i < 31; ++i) f.counts[r++] = 20 + 2 * static_cast<std::uint64_t>(i);
  return f;
}

frequency_table redocred_like() {
  frequency_table f(96);
  std::size_t r = 0;
  f.counts[r++] = 20402;
  for (int i = 0; i < 47; ++i) f.counts[r++] = 1227 + (i < 7 ? 1 : 0);
  for (int i = 0; i < 36; ++i) f.counts[r++] = 110 + 5 * static_cast<std::uint64_t>(i);
  for (int i = 0; i < 12; ++i) f.counts[r++] = 40 + 4 * static_cast<std::uint64_t>(i);
  return f;
}

outcome a9() {
  outcome o;
  const auto d = docred_like();
  const auto r = redocred_like();
  auto top4 = d.counts;
  std::sort(top4.rbegin(), top4.rend());
  o.require(d.total() == 38180, "DocRED-like total != 38,180");
  o.require(top4[0] + top4[1] + top4[2] + top4[3] == 38180 / 2, "top four relations are not half");
  o.require(r.total() == 85932, "Re-DocRED-like total != 85,932");
  o.require(*std::max_element(r.counts.begin(), r.counts.end()) == 20402, "top relation != 20,402");
  const auto d100 = long_tail_set(d, 100).size();
  const auto r300 = long_tail_set(r, 300).size();
  const auto r100 = long_tail_set(r, 100).size();
  o.require(d100 == 31, "DocRED threshold 100 gives " + std::to_string(d100));
  o.require(r300 == 48, "Re-DocRED threshold 300 gives " + std::to_string(r300));
  o.require(r100 == 12, "Re-DocRED threshold 100 gives " + std::to_string(r100));
  o.note << (o.pass ? "" : "; ") << "DocRED/100=" << d100 << " Re-DocRED/300=" << r300 << " Re-DocRED/100=" << r100;
  return o;
}

// ---- A10 ----
outcome a10() {
  outcome o;
  const auto t0 = clock_type::now();
  simulation_config cfg;  // 200 distant documents, 20 relations (5 long-tail), 5 models, k=25, b=100
  std::vector<std::uint64_t> seeds(kSimulationSeeds);
  std::iota(seeds.begin(), seeds.end(), 1);
  const auto runs = simulate(cfg, seeds, scratch("a10_simulation"));
  std::map<std::uint64_t, double> doremi, random;
  int monotone = 0, four_iterations = 0;
  for (const auto& run : runs) {
    if (run.strategy == "random") {
      random[run.seed] = run.final_long_tail_f1;
      continue;
    }
    doremi[run.seed] = run.final_long_tail_f1;
    monotone += run.mean_non_increasing();
    four_iterations += run.points.size() == 5;
  }
  int wins = 0;
  for (auto s : seeds) wins += doremi.at(s) >= random.at(s);
  const double secs = seconds_since(t0);
  o.require(wins >= kSimulationRequired, "DOREMI >= random in only " + std::to_string(wins) + " seeds");
  o.require(monotone >= kSimulationRequired, "mean non-increasing in only " + std::to_string(monotone) + " seeds");
  o.require(four_iterations == kSimulationSeeds, "not every run did 4 iterations");
  o.require(secs < kSimulationLimitSeconds, "too slow");
  o.note << (o.pass ? "" : "; ") << "DOREMI>=random " << wins << "/" << kSimulationSeeds << ", non-increasing "
         << monotone << "/" << kSimulationSeeds << ", time=" << std::fixed << std::setprecision(1) << secs << "s";
  return o;
}

// ---- A11 ----
outcome a11() {
  outcome o;
  // three models x three relations per pair
  const std::vector<prob_table> pairs{
      {{0.9, 0.7, 1.0}, {0.3, 0.5, 0.2}, {1.0, 0.8, 0.9}}, {{0.8, 0.7, 0.9}, {0.8, 0.3, 0.7}, {0.7, 0.5, 0.1}},
      {{0.7, 1.0, 0.3}, {1.0, 0.7, 0.2}, {0.8, 0.1, 1.0}}, {{0.9, 0.5, 1.0}, {0.7, 0.0, 0.0}, {0.9, 0.9, 1.0}},
      {{1.0, 0.8, 0.3}, {0.7, 0.9, 0.7}, {0.2, 0.7, 0.5}}, {{0.0, 0.7, 0.5}, {0.5, 0.2, 1.0}, {0.5, 1.0, 0.9}}};
  const auto ms = committee(pairs);
  const auto keys = committee_keys(pairs.size());
  const disagreement_config cfg{kDelta, 3, 3};
  const std::vector<std::pair<criterion_kind, std::function<double(const prob_table&)>>> criteria{
      {criterion_kind::doremi_log, [](const prob_table& t) { return oracle_log_score(t, kDelta); }},
      {criterion_kind::ppm, [](const prob_table& t) { return oracle_ppm(t); }},
      {criterion_kind::ppd, [](const prob_table& t) { return oracle_ppd(t, kDelta); }},
      {criterion_kind::max_entropy, [](const prob_table& t) { return oracle_entropy(t); }}};
  std::set<entity_pair_key> tops;
  for (const auto& [kind, oracle] : criteria) {
    const auto top = top_pairs(score_pairs(kind, ms, keys, cfg), 1);
    std::vector<scored_pair> expected;
    for (std::size_t i = 0; i < pairs.size(); ++i) expected.push_back({keys[i], oracle(pairs[i])});
    o.require(top == top_pairs(expected, 1), std::string(to_string(kind)) + " top-1 differs from oracle");
    tops.insert(top.at(0));
    o.note << to_string(kind) << "->" << to_string(top.at(0)) << ' ';
  }
  o.require(tops.size() == 4, "criteria share a top-1 pair");
  return o;
}

// ---- A12 ----
outcome a12() {
  outcome o;
  auto w = make_loop_world(1212, 3, 40);
  w.config.sampler.k = 8;
  w.config.budget = 24;
  const gold_annotation_source oracle(w.world.ds_truth);

  const auto straight_dir = scratch("a12_straight");
  {
    auto runner = loop_runner::start(w.inputs, w.config, straight_dir);
    runner.run_batch(oracle);
  }
  const auto reference = read_file(straight_dir / "dds" / "dds.json");

  // interrupted twice: mid-batch and between iterations
  const auto resumed_dir = scratch("a12_resumed");
  {
    auto runner = loop_runner::start(w.inputs, w.config, resumed_dir);
    const auto batch = runner.prepare_batch();
    for (std::size_t i = 0; i < batch.items.size() / 2; ++i) {
      runner.submit(batch.items[i].pair, *oracle.labels_for(batch.items[i].pair), oracle.annotator());
    }
  }
  {
    auto runner = loop_runner::resume(w.inputs, w.config, resumed_dir);
    runner.annotate_from(oracle);
    runner.run_iteration();
  }
  {
    auto runner = loop_runner::resume(w.inputs, w.config, resumed_dir);
    runner.run_batch(oracle);
  }
  const auto resumed = read_file(resumed_dir / "dds" / "dds.json");
  o.require(!reference.empty(), "uninterrupted run wrote no DDS");
  o.require(resumed == reference, "resumed DDS differs from uninterrupted run");

  const auto served_dir = scratch("a12_served");
  {
    auto runner = loop_runner::start(w.inputs, w.config, served_dir);
    runner.prepare_batch();
    running_server server(runner, {"a12", std::nullopt, std::nullopt});
    auto client = server.client();
    const auto status = drive_over_http(client, oracle, w.inputs.schema);
    o.require(status["dds_written"].get<bool>(), "serve mode did not write a DDS");
  }
  const auto served = read_file(served_dir / "dds" / "dds.json");
  o.require(served == reference, "serve-mode DDS differs from batch mode");
  o.note << (o.pass ? "" : "; ") << "resumed and HTTP-driven runs byte-identical (" << reference.size() << " bytes)";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<outcome()>>> checks{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4},  {"A5", a5},   {"A6", a6},
      {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11}, {"A12", a12}};
  int failures = 0;
  for (const auto& [id, check] : checks) {
    outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << "exception: " << e.what();
    }
    failures += !o.pass;
    std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.note.str() << std::endl;
  }
  return failures;
}
