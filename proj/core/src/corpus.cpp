#include "doremi/corpus.hpp"

#include <limits>
#include <sstream>

#include "doremi/error.hpp"
#include "json_io.hpp"

namespace doremi {

using detail::field;
using detail::json;

relation_schema::relation_schema(std::vector<std::pair<std::string, std::string>> code_names) {
  if (code_names.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw argument_error("relation schema too large");
  }
  codes_.reserve(code_names.size());
  names_.reserve(code_names.size());
  for (auto& [code, name] : code_names) {
    auto idx = static_cast<std::uint16_t>(codes_.size());
    if (!by_code_.emplace(code, idx).second) {
      throw validation_error("duplicate relation id '" + code + "' in schema");
    }
    codes_.push_back(std::move(code));
    names_.push_back(std::move(name));
  }
}

relation_schema relation_schema::from_json(const json& j) {
  std::vector<std::pair<std::string, std::string>> entries;
  if (j.is_array()) {
    for (const auto& item : j) {
      if (item.is_array() && item.size() == 2) {
        entries.emplace_back(item[0].get<std::string>(), item[1].get<std::string>());
      } else {
        entries.emplace_back(item.get<std::string>(), item.get<std::string>());
      }
    }
  } else if (j.is_object()) {
    for (const auto& [code, name] : j.items()) {
      entries.emplace_back(code, name.is_string() ? name.get<std::string>() : code);
    }
  } else {
    throw parse_error("relation schema must be an object or an array");
  }
  return relation_schema(std::move(entries));
}

relation_schema relation_schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  try {
    // ordered_json keeps file order so relation ids follow the file.
    auto ordered = nlohmann::ordered_json::parse(in);
    std::vector<std::pair<std::string, std::string>> entries;
    if (ordered.is_array()) {
      for (const auto& code : ordered) entries.emplace_back(code.get<std::string>(), code.get<std::string>());
    } else if (ordered.is_object()) {
      for (const auto& [code, name] : ordered.items()) {
        entries.emplace_back(code, name.is_string() ? name.get<std::string>() : code);
      }
    } else {
      throw parse_error(path.string() + ": relation schema must be an object or an array");
    }
    return relation_schema(std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

relation_schema relation_schema::numbered(std::size_t n) {
  std::vector<std::pair<std::string, std::string>> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto code = "R" + std::to_string(i);
    entries.emplace_back(code, code);
  }
  return relation_schema(std::move(entries));
}

std::optional<relation_id> relation_schema::find(std::string_view code) const {
  auto it = by_code_.find(std::string(code));
  if (it == by_code_.end()) return std::nullopt;
  return relation_id{it->second};
}

relation_id relation_schema::at(std::string_view code) const {
  if (auto r = find(code)) return *r;
  throw validation_error("unknown relation id '" + std::string(code) + "'");
}

std::vector<relation_id> relation_schema::relations() const {
  std::vector<relation_id> out(codes_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = relation_id{static_cast<std::uint16_t>(i)};
  return out;
}

json relation_schema::to_json() const {
  json j = json::array();
  for (std::size_t i = 0; i < codes_.size(); ++i) j.push_back({codes_[i], names_[i]});
  return j;
}

std::string to_string(const entity_pair_key& key) {
  return key.doc_id + "#" + std::to_string(key.head) + "->" + std::to_string(key.tail);
}

std::size_t entity_pair_key_hash::operator()(const entity_pair_key& key) const noexcept {
  std::size_t h = std::hash<std::string>{}(key.doc_id);
  h ^= static_cast<std::size_t>(key.head) * 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  h ^= static_cast<std::size_t>(key.tail) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
  return h;
}

std::string_view to_string(split_tag tag) {
  switch (tag) {
    case split_tag::ha: return "HA";
    case split_tag::ds: return "DS";
    case split_tag::dev: return "DEV";
    case split_tag::test: return "TEST";
  }
  return "?";
}

split_tag parse_split_tag(std::string_view text) {
  if (text == "HA" || text == "ha") return split_tag::ha;
  if (text == "DS" || text == "ds") return split_tag::ds;
  if (text == "DEV" || text == "dev") return split_tag::dev;
  if (text == "TEST" || text == "test") return split_tag::test;
  throw argument_error("unknown split tag '" + std::string(text) + "'");
}

corpus::corpus(split_tag tag, std::vector<document> documents)
    : tag_(tag), documents_(std::move(documents)) {
  index_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!index_.emplace(documents_[i].title, i).second) {
      throw validation_error("document " + std::to_string(i) + ": duplicate title '" +
                             documents_[i].title + "'");
    }
  }
}

const document* corpus::find(std::string_view doc_id) const {
  auto it = index_.find(std::string(doc_id));
  return it == index_.end() ? nullptr : &documents_[it->second];
}

std::size_t corpus::label_count() const {
  std::size_t n = 0;
  for (const auto& d : documents_) n += d.labels.size();
  return n;
}

void validate_document(const document& doc, std::size_t doc_index, std::size_t relation_count) {
  auto fail = [&](const std::string& msg) {
    throw validation_error("document " + std::to_string(doc_index) + " ('" + doc.title + "'): " + msg);
  };
  const auto n_sents = doc.sentences.size();
  for (std::size_t e = 0; e < doc.entities.size(); ++e) {
    const auto& ent = doc.entities[e];
    if (ent.mentions.empty()) fail("entity " + std::to_string(e) + " has no mentions");
    for (const auto& m : ent.mentions) {
      if (m.sentence < 0 || static_cast<std::size_t>(m.sentence) >= n_sents) {
        fail("entity " + std::to_string(e) + " mention sentence " + std::to_string(m.sentence) +
             " out of range");
      }
      const auto len = doc.sentences[static_cast<std::size_t>(m.sentence)].size();
      if (m.start < 0 || m.end <= m.start || static_cast<std::size_t>(m.end) > len) {
        fail("entity " + std::to_string(e) + " mention span [" + std::to_string(m.start) + "," +
             std::to_string(m.end) + ") invalid for sentence of length " + std::to_string(len));
      }
    }
  }
  const auto n_ents = static_cast<int>(doc.entities.size());
  for (std::size_t l = 0; l < doc.labels.size(); ++l) {
    const auto& lab = doc.labels[l];
    if (lab.head < 0 || lab.head >= n_ents || lab.tail < 0 || lab.tail >= n_ents) {
      fail("label " + std::to_string(l) + " references entity outside [0," + std::to_string(n_ents) + ")");
    }
    if (lab.head == lab.tail) fail("label " + std::to_string(l) + " has head == tail");
    if (lab.relation.index >= relation_count) fail("label " + std::to_string(l) + " relation out of schema");
    for (int ev : lab.evidence) {
      if (ev < 0 || static_cast<std::size_t>(ev) >= n_sents) {
        fail("label " + std::to_string(l) + " evidence sentence out of range");
      }
    }
  }
}

namespace {

document parse_document(const json& j, std::size_t doc_index, const relation_schema& schema) {
  const std::string ctx = "document " + std::to_string(doc_index);
  if (!j.is_object()) throw parse_error(ctx + ": not an object");
  document doc;
  doc.title = field<std::string>(j, "title", ctx);
  doc.sentences = field<std::vector<std::vector<std::string>>>(j, "sents", ctx);

  auto vertex_it = j.find("vertexSet");
  if (vertex_it == j.end() || !vertex_it->is_array()) throw parse_error(ctx + ": missing field 'vertexSet'");
  for (std::size_t e = 0; e < vertex_it->size(); ++e) {
    const auto& ment_arr = (*vertex_it)[e];
    const std::string ectx = ctx + " vertexSet[" + std::to_string(e) + "]";
    if (!ment_arr.is_array()) throw parse_error(ectx + ": not an array");
    entity ent;
    ent.index = static_cast<int>(e);
    for (std::size_t m = 0; m < ment_arr.size(); ++m) {
      const auto& mj = ment_arr[m];
      const std::string mctx = ectx + "[" + std::to_string(m) + "]";
      mention men;
      men.sentence = field<int>(mj, "sent_id", mctx);
      auto pos = field<std::vector<int>>(mj, "pos", mctx);
      if (pos.size() != 2) throw parse_error(mctx + ": field 'pos' must have two elements");
      men.start = pos[0];
      men.end = pos[1];
      men.name = field<std::string>(mj, "name", mctx);
      men.type = mj.contains("type") ? field<std::string>(mj, "type", mctx) : std::string();
      ent.mentions.push_back(std::move(men));
    }
    if (!ent.mentions.empty()) ent.type = ent.mentions.front().type;
    doc.entities.push_back(std::move(ent));
  }

  if (auto labels_it = j.find("labels"); labels_it != j.end()) {
    if (!labels_it->is_array()) throw parse_error(ctx + ": field 'labels' must be an array");
    for (std::size_t l = 0; l < labels_it->size(); ++l) {
      const auto& lj = (*labels_it)[l];
      const std::string lctx = ctx + " labels[" + std::to_string(l) + "]";
      gold_label lab;
      lab.head = field<int>(lj, "h", lctx);
      lab.tail = field<int>(lj, "t", lctx);
      const auto code = field<std::string>(lj, "r", lctx);
      auto rel = schema.find(code);
      if (!rel) throw validation_error(lctx + ": unknown relation id '" + code + "'");
      lab.relation = *rel;
      if (lj.contains("evidence")) lab.evidence = field<std::vector<int>>(lj, "evidence", lctx);
      doc.labels.push_back(std::move(lab));
    }
  }
  validate_document(doc, doc_index, schema.size());
  return doc;
}

}  // namespace

corpus parse_corpus(const json& j, split_tag tag, const relation_schema& schema) {
  if (!j.is_array()) throw parse_error("corpus: top level must be an array of documents");
  std::vector<document> docs;
  docs.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) docs.push_back(parse_document(j[i], i, schema));
  return corpus(tag, std::move(docs));
}

corpus load_corpus(const std::filesystem::path& path, split_tag tag, const relation_schema& schema) {
  auto j = detail::read_json_file(path);
  try {
    return parse_corpus(j, tag, schema);
  } catch (const parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  } catch (const validation_error& e) {
    throw validation_error(path.string() + ": " + e.what());
  }
}

json corpus_to_json(const corpus& c, const relation_schema& schema) {
  json out = json::array();
  for (const auto& doc : c.documents()) {
    json vertex = json::array();
    for (const auto& ent : doc.entities) {
      json ments = json::array();
      for (const auto& m : ent.mentions) {
        ments.push_back({{"name", m.name}, {"pos", {m.start, m.end}}, {"sent_id", m.sentence}, {"type", m.type}});
      }
      vertex.push_back(std::move(ments));
    }
    json labels = json::array();
    for (const auto& lab : doc.labels) {
      labels.push_back({{"evidence", lab.evidence}, {"h", lab.head}, {"r", schema.code(lab.relation)}, {"t", lab.tail}});
    }
    out.push_back({{"labels", std::move(labels)},
                   {"sents", doc.sentences},
                   {"title", doc.title},
                   {"vertexSet", std::move(vertex)}});
  }
  return out;
}

void write_corpus(const corpus& c, const relation_schema& schema, const std::filesystem::path& path) {
  detail::write_file_atomic(path, corpus_to_json(c, schema).dump());
}

corpus concat(const corpus& first, const corpus& second, split_tag tag) {
  std::vector<document> docs(first.documents().begin(), first.documents().end());
  docs.insert(docs.end(), second.documents().begin(), second.documents().end());
  return corpus(tag, std::move(docs));
}

std::uint64_t frequency_table::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

frequency_table& frequency_table::operator+=(const frequency_table& other) {
  if (counts.size() != other.counts.size()) throw argument_error("frequency tables over different schemas");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

frequency_table relation_frequencies(const corpus& c, std::size_t relation_count) {
  frequency_table table(relation_count);
  for (const auto& doc : c.documents()) {
    for (const auto& lab : doc.labels) ++table.counts.at(lab.relation.index);
  }
  return table;
}

relation_set long_tail_set(const frequency_table& freq, std::uint64_t threshold) {
  if (threshold < 1) throw argument_error("long-tail threshold must be >= 1");
  relation_set out;
  for (std::size_t i = 0; i < freq.counts.size(); ++i) {
    if (freq.counts[i] < threshold) out.insert(relation_id{static_cast<std::uint16_t>(i)});
  }
  return out;
}

std::vector<entity_pair_key> enumerate_pairs(const document& doc) {
  const int m = static_cast<int>(doc.entities.size());
  std::vector<entity_pair_key> pairs;
  if (m < 2) return pairs;
  pairs.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(m - 1));
  for (int h = 0; h < m; ++h) {
    for (int t = 0; t < m; ++t) {
      if (h != t) pairs.push_back({doc.title, h, t});
    }
  }
  return pairs;
}

}  // namespace doremi
