#include <doctest.h>

#include <cmath>
#include <fstream>

#include "doremi/error.hpp"
#include "doremi/loop.hpp"
#include "loop_fixture.hpp"
#include "support.hpp"

using namespace doremi;
using namespace doremi::testing;
namespace fs = std::filesystem;

TEST_SUITE("loop") {
  TEST_CASE("stop rule") {
    loop_config cfg;
    cfg.budget = 400;
    iteration_state s;
    s.mean_disagreement = 0.0;
    CHECK(should_stop(s, cfg) == stop_decision::stop_epsilon);
    s.mean_disagreement = 0.5;
    s.budget_used = 400;
    CHECK(should_stop(s, cfg) == stop_decision::stop_budget);
    s.budget_used = 100;
    CHECK(should_stop(s, cfg) == stop_decision::continue_loop);
    s.exhausted = true;
    CHECK(should_stop(s, cfg) == stop_decision::stop_exhausted);
    cfg.epsilon = 0.5;
    CHECK(should_stop(s, cfg) == stop_decision::stop_epsilon);
  }

  TEST_CASE("config validation") {
    loop_config cfg;
    cfg.sampler.long_tail = {rel(0)};
    CHECK(cfg.validate().empty());
    cfg.epsilon = -1;
    CHECK_THROWS(cfg.validate());
    cfg.epsilon = 0;
    cfg.budget = 50;
    CHECK_FALSE(cfg.validate().empty());  // budget below k
    cfg.sampler.k = 0;
    CHECK_THROWS(cfg.validate());
  }

  TEST_CASE("best iterations") {
    iteration_state s;
    s.models = {{"a", {}, {}, {0.1, 0.3, 0.2}}, {"b", {}, {}, {0.2, 0.2}}};
    const auto best = best_iterations(s);
    CHECK(best.at("a") == 1);
    CHECK(best.at("b") == 0);

    std::mt19937_64 rng(9);
    iteration_state five;
    for (int m = 0; m < 5; ++m) {
      model_history h{"m" + std::to_string(m), {}, {}, {}};
      for (int it = 0; it < 6; ++it) h.dev_long_tail_f1.push_back(std::uniform_int_distribution<int>(0, 4)(rng) / 4.0);
      five.models.push_back(h);
    }
    const auto got = best_iterations(five);
    for (const auto& h : five.models) {
      int arg = 0;
      for (int i = 1; i < static_cast<int>(h.dev_long_tail_f1.size()); ++i)
        if (h.dev_long_tail_f1[i] > h.dev_long_tail_f1[arg]) arg = i;
      CHECK(got.at(h.name) == arg);
    }
  }

  TEST_CASE("state round trip and damage") {
    iteration_state s;
    s.models = {{"a", {"ckpt/a/0"}, {"matrices/a/0.pred"}, {0.25}}};
    s.mean_history = {0.125};
    s.candidate_history = {7};
    s.mean_disagreement = 0.125;
    const auto dir = scratch("state_rt");
    save_state(s, dir / "state.json");
    CHECK(restore_state(dir / "state.json") == s);

    std::ofstream(dir / "broken.json") << "{\"schema_version\": 1, \"iteration\":";
    CHECK_THROWS_AS(restore_state(dir / "broken.json"), parse_error);
    std::ofstream(dir / "missing.json") << R"({"schema_version": 1})";
    CHECK_THROWS_AS(restore_state(dir / "missing.json"), parse_error);
    auto text = read_file(dir / "state.json");
    text.replace(text.find("\"schema_version\": 1"), 19, "\"schema_version\": 9");
    std::ofstream(dir / "future.json") << text;
    CHECK_THROWS_AS(restore_state(dir / "future.json"), version_error);
  }

  TEST_CASE("pretraining two models") {
    auto w = make_loop_world(1, 2, 10);
    const auto dir = scratch("loop_pretrain");
    auto runner = loop_runner::start(w.inputs, w.config, dir);
    CHECK(runner.state().iteration == 0);
    CHECK(std::isfinite(runner.state().mean_disagreement));
    CHECK(runner.state().mean_history.size() == 1);
    CHECK_THROWS_AS(loop_runner::start(w.inputs, w.config, dir), precondition_error);
  }

  TEST_CASE("titles shared between splits are rejected before anything is written") {
    auto w = make_loop_world(10, 3, 10);
    w.inputs.dev = w.inputs.ds;
    const auto dir = scratch("loop_shared_titles");
    CHECK_THROWS_AS(loop_runner::start(w.inputs, w.config, dir), validation_error);
    CHECK_FALSE(fs::exists(dir / "pool.log"));
  }

  TEST_CASE("identical perfect models agree completely") {
    auto w = make_loop_world(2, 3, 10);
    for (auto& a : w.inputs.adapters) {
      synthetic_params p;
      p.confidence_mean = 1.0;
      p.confidence_spread = 0.0;
      a = std::make_shared<synthetic_adapter>(p, synthetic_learning{}, w.world.ds_truth);
    }
    w.config.mean_over = mean_scope::all;
    auto runner = loop_runner::start(w.inputs, w.config, scratch("loop_unanimous"));
    CHECK(runner.state().mean_disagreement == 0.0);
    CHECK(runner.status() == stop_decision::stop_epsilon);
  }

  TEST_CASE("five-model pool records five checkpoints") {
    auto w = make_loop_world(3, 5, 10);
    const auto dir = scratch("loop_five");
    auto runner = loop_runner::start(w.inputs, w.config, dir);
    REQUIRE(runner.state().models.size() == 5);
    for (const auto& m : runner.state().models) {
      REQUIRE(m.checkpoints.size() == 1);
      CHECK(fs::exists(dir / m.checkpoints[0]));
      CHECK(fs::exists(dir / m.matrices[0]));
    }
  }

  TEST_CASE("one iteration advances the counter") {
    auto w = make_loop_world(4, 2, 20);
    auto runner = loop_runner::start(w.inputs, w.config, scratch("loop_one"));
    const auto& batch = runner.prepare_batch();
    CHECK(batch.items.size() == 10);
    CHECK_THROWS_AS(runner.run_iteration(), precondition_error);
    runner.annotate_from(gold_annotation_source(w.world.ds_truth));
    runner.run_iteration();
    CHECK(runner.state().iteration == 1);
    CHECK(runner.state().mean_history.size() == 2);
    CHECK(runner.state().budget_used == 10);
    for (const auto& m : runner.state().models) CHECK(m.dev_long_tail_f1.size() == 2);
  }

  TEST_CASE("budget of two batches stops after two iterations") {
    auto w = make_loop_world(5, 3, 40);
    w.config.sampler.k = 10;
    w.config.budget = 20;
    const auto dir = scratch("loop_2k");
    auto runner = loop_runner::start(w.inputs, w.config, dir);
    const auto dds = runner.run_batch(gold_annotation_source(w.world.ds_truth));
    CHECK(runner.state().iteration == 2);
    CHECK(runner.pool().budget_used() == 20);
    CHECK(runner.status() == stop_decision::stop_budget);
    CHECK(fs::exists(dir / "dds" / "dds.json"));
    CHECK(fs::exists(dir / "batches" / "1.jsonl"));
    CHECK(fs::exists(dir / "batches" / "2.jsonl"));
  }

  TEST_CASE("last batch is cut to the remaining budget") {
    auto w = make_loop_world(6, 3, 40);
    w.config.sampler.k = 10;
    w.config.budget = 25;
    auto runner = loop_runner::start(w.inputs, w.config, scratch("loop_partial"));
    runner.run_batch(gold_annotation_source(w.world.ds_truth));
    CHECK(runner.state().iteration == 3);
    CHECK(runner.pool().budget_used() == 25);
  }

  TEST_CASE("fixed seeds give identical histories") {
    auto w = make_loop_world(7, 3, 30);
    auto a = loop_runner::start(w.inputs, w.config, scratch("loop_det_a"));
    a.run_batch(gold_annotation_source(w.world.ds_truth));
    auto b = loop_runner::start(w.inputs, w.config, scratch("loop_det_b"));
    b.run_batch(gold_annotation_source(w.world.ds_truth));
    CHECK(a.state() == b.state());
    CHECK(read_file(a.run_dir() / "dds" / "dds.json") == read_file(b.run_dir() / "dds" / "dds.json"));
  }

  TEST_CASE("resume picks up an open batch") {
    auto w = make_loop_world(8, 3, 30);
    const auto dir = scratch("loop_resume");
    {
      auto runner = loop_runner::start(w.inputs, w.config, dir);
      const auto batch = runner.prepare_batch();
      runner.submit(batch.items[0].pair, {}, "x");
    }
    auto resumed = loop_runner::resume(w.inputs, w.config, dir);
    REQUIRE(resumed.current_batch());
    CHECK(resumed.pool().budget_used() == 1);
    CHECK(resumed.queue().size() == 9);

    auto renamed = w.inputs;
    renamed.pool = model_pool({{"x", 0.5}, {"y", 0.5}, {"z", 0.5}});
    CHECK_THROWS_AS(loop_runner::resume(renamed, w.config, dir), validation_error);
  }

  TEST_CASE("failing adapter aborts the round without committing") {
    auto w = make_loop_world(9, 2, 10);
    w.inputs.adapters[1] =
        std::make_shared<subprocess_adapter>(shell_adapter("echo broken >&2; exit 3", scratch("loop_fail_wd")));
    try {
      loop_runner::start(w.inputs, w.config, scratch("loop_fail"));
      FAIL("expected adapter_error");
    } catch (const adapter_error& e) {
      CHECK(e.diagnostics().find("broken") != std::string::npos);
    }
  }

  TEST_CASE("enum names") {
    CHECK(parse_mean_scope(to_string(mean_scope::all)) == mean_scope::all);
    CHECK(parse_aggregate_source(to_string(aggregate_source::final)) == aggregate_source::final);
    CHECK_THROWS(parse_mean_scope("some"));
  }
}
