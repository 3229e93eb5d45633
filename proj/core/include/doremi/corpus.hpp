#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace doremi {

// Dense index of a relation inside its relation_schema.
struct relation_id {
  std::uint16_t index = 0;

  constexpr auto operator<=>(const relation_id&) const = default;
};

using relation_set = std::set<relation_id>;

// Closed set of relation codes (e.g. "P17") with display names. Relation ids
// are positions in declaration order.
class relation_schema {
 public:
  relation_schema() = default;
  explicit relation_schema(std::vector<std::pair<std::string, std::string>> code_names);

  // Accepts either an object {code: display name} (DocRED rel_info.json) or an
  // array of codes.
  static relation_schema from_json(const nlohmann::json& j);
  static relation_schema load(const std::filesystem::path& path);
  // Codes R0..R{n-1}; used by synthetic corpora and tests.
  static relation_schema numbered(std::size_t n);

  std::size_t size() const noexcept { return codes_.size(); }
  bool empty() const noexcept { return codes_.empty(); }

  std::optional<relation_id> find(std::string_view code) const;
  // Throws validation_error for codes outside the schema.
  relation_id at(std::string_view code) const;

  const std::string& code(relation_id r) const { return codes_.at(r.index); }
  const std::string& name(relation_id r) const { return names_.at(r.index); }

  std::vector<relation_id> relations() const;
  nlohmann::json to_json() const;

  bool operator==(const relation_schema& other) const { return codes_ == other.codes_; }

 private:
  std::vector<std::string> codes_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint16_t> by_code_;
};

struct mention {
  int sentence = 0;
  int start = 0;  // token span [start, end) within the sentence
  int end = 0;
  std::string name;
  std::string type;

  bool operator==(const mention&) const = default;
};

struct entity {
  int index = 0;
  std::vector<mention> mentions;
  std::string type;

  bool operator==(const entity&) const = default;
};

struct gold_label {
  int head = 0;
  int tail = 0;
  relation_id relation;
  std::vector<int> evidence;

  bool operator==(const gold_label&) const = default;
};

// One DocRED document. The title doubles as the document identifier.
struct document {
  std::string title;
  std::vector<std::vector<std::string>> sentences;
  std::vector<entity> entities;
  std::vector<gold_label> labels;

  const std::string& doc_id() const noexcept { return title; }
  bool operator==(const document&) const = default;
};

// Ordered (head, tail) entity pair inside one document. Ordering is
// lexicographic by (doc_id, head, tail) and is used for every deterministic
// tie-break in the pipeline.
struct entity_pair_key {
  std::string doc_id;
  int head = 0;
  int tail = 0;

  auto operator<=>(const entity_pair_key&) const = default;
  bool operator==(const entity_pair_key&) const = default;
};

std::string to_string(const entity_pair_key& key);

struct entity_pair_key_hash {
  std::size_t operator()(const entity_pair_key& key) const noexcept;
};

enum class split_tag { ha, ds, dev, test };

std::string_view to_string(split_tag tag);
split_tag parse_split_tag(std::string_view text);

// Immutable after construction; documents keep file order.
class corpus {
 public:
  corpus() = default;
  corpus(split_tag tag, std::vector<document> documents);

  split_tag tag() const noexcept { return tag_; }
  std::span<const document> documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }

  const document* find(std::string_view doc_id) const;
  std::size_t label_count() const;

 private:
  split_tag tag_ = split_tag::ha;
  std::vector<document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Parses and validates a DocRED-format array. Relation codes must belong to
// the schema.
corpus parse_corpus(const nlohmann::json& j, split_tag tag, const relation_schema& schema);
corpus load_corpus(const std::filesystem::path& path, split_tag tag, const relation_schema& schema);

nlohmann::json corpus_to_json(const corpus& c, const relation_schema& schema);
void write_corpus(const corpus& c, const relation_schema& schema, const std::filesystem::path& path);

// Throws validation_error describing the first broken invariant.
void validate_document(const document& doc, std::size_t doc_index, std::size_t relation_count);

// Concatenates documents; document titles must stay unique.
corpus concat(const corpus& first, const corpus& second, split_tag tag);

// Training-instance count per relation, indexed by relation_id::index.
struct frequency_table {
  std::vector<std::uint64_t> counts;

  explicit frequency_table(std::size_t relation_count = 0) : counts(relation_count, 0) {}

  std::uint64_t operator[](relation_id r) const { return counts.at(r.index); }
  std::uint64_t total() const;
  frequency_table& operator+=(const frequency_table& other);
  bool operator==(const frequency_table&) const = default;
};

frequency_table relation_frequencies(const corpus& c, std::size_t relation_count);

// Relations whose count is strictly below `threshold`.
relation_set long_tail_set(const frequency_table& freq, std::uint64_t threshold);

// All ordered pairs of distinct entities, in key order.
std::vector<entity_pair_key> enumerate_pairs(const document& doc);

}  // namespace doremi

template <>
struct std::hash<doremi::entity_pair_key> : doremi::entity_pair_key_hash {};
