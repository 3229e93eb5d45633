#include <doctest.h>

#include "doremi/error.hpp"
#include "doremi/service/manifest.hpp"
#include "http_driver.hpp"
#include "loop_fixture.hpp"
#include "support.hpp"

using namespace doremi;
using namespace doremi::testing;
using json = nlohmann::json;

TEST_SUITE("service") {
  TEST_CASE("queue, annotation and advance endpoints") {
    auto w = make_loop_world(11, 3, 30);
    w.config.sampler.k = 3;
    w.config.budget = 6;
    auto runner = loop_runner::start(w.inputs, w.config, scratch("svc_api"));
    runner.prepare_batch();
    running_server server(runner, {"svc", std::nullopt, std::nullopt});
    auto c = server.client();

    auto status = body_of(c.Get("/api/status"));
    CHECK(status["run_id"] == "svc");
    CHECK(status["pending"] == 3);
    CHECK(status["budget_used"] == 0);

    auto rels = body_of(c.Get("/api/relations"));
    CHECK(rels.size() == w.inputs.schema.size());

    std::set<std::string> seen;
    std::vector<json> items;
    for (int i = 0; i < 3; ++i) {
      auto next = body_of(c.Get("/api/queue/next?annotator=a" + std::to_string(i)));
      REQUIRE_FALSE(next["item"].is_null());
      items.push_back(next["item"]);
      seen.insert(next["item"]["title"].get<std::string>() + "/" + next["item"]["h_idx"].dump() + "/" +
                  next["item"]["t_idx"].dump());
      CHECK(next["item"].contains("head"));
      CHECK(next["item"]["predictions"].size() == 3);
    }
    CHECK(seen.size() == 3);
    CHECK(body_of(c.Get("/api/queue/next?annotator=late"))["item"].is_null());

    auto doc = c.Get("/api/docs/" + items[0]["title"].get<std::string>());
    REQUIRE(doc);
    CHECK(doc->status == 200);
    CHECK(c.Get("/api/docs/missing-doc")->status == 404);

    auto post = [&](const json& item, json labels) {
      json body = {{"title", item["title"]}, {"h_idx", item["h_idx"]}, {"t_idx", item["t_idx"]}, {"labels", labels}};
      return c.Post("/api/annotations", body.dump(), "application/json");
    };
    CHECK(post(items[0], json::array({"nope"}))->status == 400);
    CHECK(c.Post("/api/annotations", "{", "application/json")->status == 400);
    auto ok = post(items[0], json::array({w.inputs.schema.code(*w.world.long_tail.begin())}));
    REQUIRE(ok->status == 200);
    CHECK(json::parse(ok->body)["budget_used"] == 1);
    CHECK(post(items[0], json::array())->status == 409);
    CHECK(post({{"title", "x"}, {"h_idx", 0}, {"t_idx", 1}}, json::array())->status == 409);

    auto blocked = c.Post("/api/iterations/advance", "", "application/json");
    CHECK(blocked->status == 409);
    CHECK(json::parse(blocked->body)["pending"] == 2);

    CHECK(post(items[1], json::array())->status == 200);
    CHECK(post(items[2], json::array())->status == 200);
    auto adv = c.Post("/api/iterations/advance", "", "application/json");
    REQUIRE(adv->status == 200);
    auto after = json::parse(adv->body);
    CHECK(after["iteration"] == 1);
    CHECK(after["budget_used"] == 3);
    CHECK(after["pending"] == 3);
    CHECK(after["round_stats"]["totals"]["na"] == 2);
  }

  TEST_CASE("bearer token guards the API") {
    auto w = make_loop_world(12, 2, 10);
    auto runner = loop_runner::start(w.inputs, w.config, scratch("svc_token"));
    running_server server(runner, {"tok", std::string("s3cret"), std::nullopt});
    auto c = server.client();
    CHECK(c.Get("/api/status")->status == 401);
    c.set_bearer_token_auth("wrong");
    CHECK(c.Get("/api/status")->status == 401);
    c.set_bearer_token_auth("s3cret");
    CHECK(c.Get("/api/status")->status == 200);
  }

  TEST_CASE("manifest round trip and pinning") {
    const auto dir = scratch("svc_manifest");
    service::run_manifest m;
    m.run_id = "r1";
    m.created = "2026-01-01T00:00:00Z";
    m.relations = fixture("relations.json");
    m.ha = m.ds = m.dev = fixture("three_docs.json");
    service::model_entry a;
    a.member = {"a", 0.5};
    a.synthetic = synthetic_params{};
    service::model_entry b = a;
    b.member.name = "b";
    b.command = shell_adapter("adapter", dir, std::chrono::seconds(5));
    b.synthetic.reset();
    m.models = {a, b};
    m.long_tail_codes = {"P166"};
    m.save(dir / "m.json");
    const auto back = service::run_manifest::load(dir / "m.json");
    CHECK(back.to_json() == m.to_json());

    service::pin_manifest(m, dir / "run");
    auto later = m;
    later.created = "2026-02-02T00:00:00Z";
    CHECK_NOTHROW(service::pin_manifest(later, dir / "run"));
    later.loop.budget = 7;
    CHECK_THROWS_AS(service::pin_manifest(later, dir / "run"), conflict_error);

    const auto resolved = service::resolve(m);
    CHECK(resolved.config.sampler.long_tail == relation_set{rel(3)});
    CHECK(resolved.inputs.adapters.size() == 2);
  }
}
