#include "doremi/predictions.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "doremi/error.hpp"
#include "json_io.hpp"

namespace doremi {

using detail::field;
using detail::json;

prediction_matrix::prediction_matrix(std::string model, int iteration, std::vector<prediction_row> rows)
    : model_(std::move(model)), iteration_(iteration), rows_(std::move(rows)) {
  if (iteration_ < 0) throw argument_error("prediction matrix iteration must be >= 0");
  for (auto& row : rows_) {
    for (const auto& s : row.scores) {
      if (!(s.probability >= 0.0 && s.probability <= 1.0)) {
        throw validation_error("probability " + std::to_string(s.probability) + " outside [0,1] for " +
                               to_string(row.pair));
      }
    }
    std::erase_if(row.scores, [](const relation_score& s) { return s.probability < storage_floor; });
    std::sort(row.scores.begin(), row.scores.end(),
              [](const relation_score& a, const relation_score& b) { return a.relation < b.relation; });
    for (std::size_t i = 1; i < row.scores.size(); ++i) {
      if (row.scores[i].relation == row.scores[i - 1].relation) {
        throw validation_error("duplicate relation score for " + to_string(row.pair));
      }
    }
  }
  std::sort(rows_.begin(), rows_.end(),
            [](const prediction_row& a, const prediction_row& b) { return a.pair < b.pair; });
  for (std::size_t i = 1; i < rows_.size(); ++i) {
    if (rows_[i].pair == rows_[i - 1].pair) {
      throw validation_error("duplicate prediction record for " + to_string(rows_[i].pair));
    }
  }
  std::erase_if(rows_, [](const prediction_row& r) { return r.scores.empty(); });
}

std::size_t prediction_matrix::entry_count() const noexcept {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.scores.size();
  return n;
}

std::span<const relation_score> prediction_matrix::row(const entity_pair_key& pair) const {
  auto it = std::lower_bound(rows_.begin(), rows_.end(), pair,
                             [](const prediction_row& r, const entity_pair_key& k) { return r.pair < k; });
  if (it == rows_.end() || it->pair != pair) return {};
  return it->scores;
}

double prediction_matrix::score(const entity_pair_key& pair, relation_id r) const {
  auto scores = row(pair);
  auto it = std::lower_bound(scores.begin(), scores.end(), r,
                             [](const relation_score& s, relation_id id) { return s.relation < id; });
  return (it != scores.end() && it->relation == r) ? it->probability : 0.0;
}

prediction_matrix prediction_matrix::restricted_to(const corpus& keep) const {
  std::vector<prediction_row> kept;
  for (const auto& r : rows_) {
    if (keep.find(r.pair.doc_id) != nullptr) kept.push_back(r);
  }
  return prediction_matrix(model_, iteration_, std::move(kept));
}

model_pool::model_pool(std::vector<pool_member> members) : members_(std::move(members)) {
  if (members_.size() < 2) throw argument_error("model pool needs at least two models");
  std::set<std::string> seen;
  for (const auto& m : members_) {
    if (m.name.empty()) throw argument_error("model name must not be empty");
    if (!seen.insert(m.name).second) throw argument_error("duplicate model '" + m.name + "' in pool");
    if (!(m.decision_threshold >= 0.0 && m.decision_threshold <= 1.0)) {
      throw argument_error("decision threshold for '" + m.name + "' outside [0,1]");
    }
  }
}

std::vector<std::string> model_pool::warnings() const {
  std::vector<std::string> out;
  if (members_.size() % 2 == 0) {
    out.push_back("model pool has an even number of models (" + std::to_string(members_.size()) +
                  "); an odd committee is recommended");
  }
  return out;
}

prediction_matrix ingest_predictions(const std::filesystem::path& path, const relation_schema& schema,
                                     std::string model, int iteration) {
  std::vector<prediction_row> rows;
  detail::for_each_jsonl(path, [&](const json& rec, std::size_t line_no) {
    const std::string ctx = path.string() + " record " + std::to_string(line_no);
    prediction_row row;
    row.pair.doc_id = field<std::string>(rec, "title", ctx);
    row.pair.head = field<int>(rec, "h_idx", ctx);
    row.pair.tail = field<int>(rec, "t_idx", ctx);
    auto scores_it = rec.find("scores");
    if (scores_it == rec.end() || !scores_it->is_object()) throw parse_error(ctx + ": missing field 'scores'");
    for (const auto& [code, value] : scores_it->items()) {
      auto rel = schema.find(code);
      if (!rel) throw validation_error(ctx + ": unknown relation id '" + code + "'");
      if (!value.is_number()) throw parse_error(ctx + ": score for '" + code + "' is not a number");
      const double p = value.get<double>();
      if (!(p >= 0.0 && p <= 1.0)) {
        throw validation_error(ctx + ": probability " + value.dump() + " for '" + code + "' outside [0,1]");
      }
      row.scores.push_back({*rel, p});
    }
    rows.push_back(std::move(row));
  });
  return prediction_matrix(std::move(model), iteration, std::move(rows));
}

void write_predictions(const prediction_matrix& matrix, const relation_schema& schema,
                       const std::filesystem::path& path) {
  // Hand-rolled: matrices reach millions of entries and the generic
  // serializer dominates run time.
  std::vector<std::string> codes;
  for (auto r : schema.relations()) codes.push_back(json(schema.code(r)).dump());
  std::string out;
  std::string title;
  std::string_view last_doc;
  char num[32];
  for (const auto& row : matrix.rows()) {
    if (row.pair.doc_id != last_doc) {
      title = json(row.pair.doc_id).dump();
      last_doc = row.pair.doc_id;
    }
    out += "{\"title\":";
    out += title;
    out += ",\"h_idx\":";
    out += std::to_string(row.pair.head);
    out += ",\"t_idx\":";
    out += std::to_string(row.pair.tail);
    out += ",\"scores\":{";
    bool first = true;
    for (const auto& s : row.scores) {
      if (!first) out += ',';
      first = false;
      out += codes.at(s.relation.index);
      out += ':';
      const auto res = std::to_chars(num, num + sizeof num, s.probability);
      out.append(num, res.ptr);
    }
    out += "}}\n";
  }
  detail::write_file_atomic(path, out);
}

relation_set predicted_relations(const prediction_matrix& matrix, const entity_pair_key& pair, double threshold) {
  relation_set out;
  for (const auto& s : matrix.row(pair)) {
    if (s.probability >= threshold) out.insert(s.relation);
  }
  return out;
}

}  // namespace doremi
