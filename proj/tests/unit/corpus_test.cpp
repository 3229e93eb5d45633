#include <doctest.h>

#include <nlohmann/json.hpp>

#include "doremi/corpus.hpp"
#include "doremi/error.hpp"
#include "support.hpp"

using namespace doremi;
using namespace doremi::testing;

TEST_SUITE("corpus") {
  TEST_CASE("three-document fixture keeps order") {
    const auto schema = relation_schema::load(fixture("relations.json"));
    REQUIRE(schema.size() == 4);
    CHECK(schema.code(rel(0)) == "P57");
    CHECK(schema.name(rel(1)) == "screenwriter");

    const auto c = load_corpus(fixture("three_docs.json"), split_tag::ha, schema);
    REQUIRE(c.size() == 3);
    CHECK(c.documents()[0].doc_id() == "Alpha");
    CHECK(c.documents()[1].doc_id() == "Beta");
    CHECK(c.documents()[2].doc_id() == "Gamma");
    CHECK(c.label_count() == 6);
    CHECK(c.find("Beta")->entities.size() == 3);
    CHECK(c.find("Nope") == nullptr);
  }

  TEST_CASE("load write load is identity") {
    const auto schema = relation_schema::load(fixture("relations.json"));
    const auto a = load_corpus(fixture("three_docs.json"), split_tag::ha, schema);
    const auto out = scratch("corpus_roundtrip") / "c.json";
    write_corpus(a, schema, out);
    const auto b = load_corpus(out, split_tag::ha, schema);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.documents()[i] == b.documents()[i]);
  }

  TEST_CASE("relation frequencies") {
    // labels {r1 x3, r2 x1}
    corpus c(split_tag::ha, {make_doc("d1", 3, {{0, 1, 1}, {1, 2, 1}}), make_doc("d2", 2, {{0, 1, 1}, {1, 0, 2}})});
    const auto f = relation_frequencies(c, 4);
    CHECK(f.counts == std::vector<std::uint64_t>{0, 3, 1, 0});
    CHECK(f.total() == 4);

    const auto empty = relation_frequencies(corpus(split_tag::ha, {}), 4);
    CHECK(empty.counts == std::vector<std::uint64_t>(4, 0));
  }

  TEST_CASE("long tail is strictly below threshold") {
    frequency_table f(4);
    f.counts = {0, 5, 99, 100};
    CHECK(long_tail_set(f, 100) == relation_set{rel(0), rel(1), rel(2)});
    CHECK(long_tail_set(f, 1) == relation_set{rel(0)});
    CHECK_THROWS_AS(long_tail_set(f, 0), argument_error);
  }

  TEST_CASE("pair enumeration") {
    CHECK(enumerate_pairs(make_doc("d", 3)).size() == 6);
    CHECK(enumerate_pairs(make_doc("d", 1)).empty());
    const auto keys = enumerate_pairs(make_doc("d", 4));
    std::vector<entity_pair_key> expected;
    for (int h = 0; h < 4; ++h)
      for (int t = 0; t < 4; ++t)
        if (h != t) expected.push_back({"d", h, t});
    CHECK(keys == expected);
  }

  TEST_CASE("validation rejects broken documents") {
    const auto schema = relation_schema::numbered(2);
    auto bad_label = make_doc("d", 2, {{0, 5, 0}});
    CHECK_THROWS_AS(validate_document(bad_label, 0, 2), validation_error);
    auto self_loop = make_doc("d", 2, {{1, 1, 0}});
    CHECK_THROWS_AS(validate_document(self_loop, 0, 2), validation_error);
    auto bad_span = make_doc("d", 2);
    bad_span.entities[0].mentions[0].end = 9;
    CHECK_THROWS_AS(validate_document(bad_span, 0, 2), validation_error);

    nlohmann::json unknown = nlohmann::json::parse(
        R"([{"title":"x","sents":[["a","b"]],"vertexSet":[[{"name":"a","sent_id":0,"pos":[0,1]}],[{"name":"b","sent_id":0,"pos":[1,2]}]],"labels":[{"h":0,"t":1,"r":"P999"}]}])");
    CHECK_THROWS_AS(parse_corpus(unknown, split_tag::ha, schema), validation_error);
    CHECK_THROWS_AS(parse_corpus(nlohmann::json::parse(R"([{"title":3}])"), split_tag::ha, schema), parse_error);
  }

  TEST_CASE("concat keeps titles unique") {
    corpus a(split_tag::ha, {make_doc("x", 2)});
    corpus b(split_tag::ds, {make_doc("y", 2)});
    CHECK(concat(a, b, split_tag::ha).size() == 2);
    CHECK_THROWS(concat(a, a, split_tag::ha));
  }
}
