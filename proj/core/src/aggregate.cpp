#include "doremi/aggregate.hpp"

#include <limits>
#include <set>

#include "doremi/error.hpp"
#include "json_io.hpp"

namespace doremi {

using detail::json;

void aggregation_config::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw argument_error("tau must lie in (0, 1)");
}

std::size_t denoised_dataset::label_count() const {
  std::size_t n = 0;
  for (const auto& [pair, rels] : labels) n += rels.size();
  return n;
}

std::vector<fact> denoised_dataset::facts() const {
  std::vector<fact> out;
  out.reserve(label_count());
  for (const auto& [pair, rels] : labels) {
    for (auto r : rels) out.push_back({pair, r});
  }
  return out;
}

void denoised_dataset::insert(const fact& f, std::optional<label_provenance> origin) {
  labels[f.pair].insert(f.relation);
  if (origin) provenance[f] = std::move(*origin);
}

denoised_dataset aggregate_labels(std::span<const prediction_matrix> matrices, const aggregation_config& cfg) {
  cfg.validate();
  if (matrices.empty()) throw argument_error("aggregation needs at least one prediction matrix");
  std::map<fact, label_provenance> best;
  for (const auto& m : matrices) {
    for (const auto& row : m.rows()) {
      for (const auto& s : row.scores) {
        if (!(s.probability > cfg.tau)) continue;
        auto [it, inserted] = best.try_emplace(fact{row.pair, s.relation}, label_provenance{s.probability, m.model()});
        if (!inserted && s.probability > it->second.max_confidence) it->second = {s.probability, m.model()};
      }
    }
  }
  denoised_dataset out;
  for (auto& [f, origin] : best) out.insert(f, std::move(origin));
  return out;
}

std::size_t predicted_label_count(std::span<const prediction_matrix> matrices) {
  std::set<fact> seen;
  for (const auto& m : matrices) {
    for (const auto& row : m.rows()) {
      for (const auto& s : row.scores) seen.insert({row.pair, s.relation});
    }
  }
  return seen.size();
}

denoised_dataset hybrid_merge(const denoised_dataset& dds, const denoised_dataset& other,
                              const relation_set& long_tail) {
  denoised_dataset out;
  auto take = [&](const denoised_dataset& src, bool want_long_tail) {
    for (const auto& f : src.facts()) {
      if (long_tail.contains(f.relation) != want_long_tail) continue;
      auto it = src.provenance.find(f);
      out.insert(f, it == src.provenance.end() ? std::nullopt : std::optional(it->second));
    }
  };
  take(dds, true);
  take(other, false);
  return out;
}

denoised_dataset dds_from_corpus(const corpus& c) {
  denoised_dataset out;
  for (const auto& f : gold_facts(c)) out.insert(f);
  return out;
}

corpus dds_corpus(const denoised_dataset& dds, const corpus& ds) {
  for (const auto& [pair, rels] : dds.labels) {
    const document* doc = ds.find(pair.doc_id);
    const int n = doc != nullptr ? static_cast<int>(doc->entities.size()) : 0;
    if (doc == nullptr || pair.head < 0 || pair.tail < 0 || pair.head >= n || pair.tail >= n || pair.head == pair.tail) {
      throw precondition_error("denoised label for " + to_string(pair) + " has no matching pair in the corpus");
    }
  }
  std::vector<document> docs;
  docs.reserve(ds.size());
  for (const auto& doc : ds.documents()) {
    document copy = doc;
    copy.labels.clear();
    auto it = dds.labels.lower_bound(entity_pair_key{doc.title, std::numeric_limits<int>::min(), 0});
    for (; it != dds.labels.end() && it->first.doc_id == doc.title; ++it) {
      for (auto r : it->second) copy.labels.push_back({it->first.head, it->first.tail, r, {}});
    }
    docs.push_back(std::move(copy));
  }
  return corpus(ds.tag(), std::move(docs));
}

void write_dds(const denoised_dataset& dds, const corpus& ds, const relation_schema& schema,
               const std::filesystem::path& path, std::optional<std::filesystem::path> provenance_path) {
  const auto out = dds_corpus(dds, ds);
  write_corpus(out, schema, path);

  const auto sidecar = provenance_path ? *provenance_path
                                       : (path.has_parent_path() ? path.parent_path() / "provenance.jsonl"
                                                                 : std::filesystem::path("provenance.jsonl"));
  std::string lines;
  for (const auto& [f, origin] : dds.provenance) {
    lines += json{{"title", f.pair.doc_id}, {"h_idx", f.pair.head},          {"t_idx", f.pair.tail},
                  {"r", schema.code(f.relation)}, {"max_conf", origin.max_confidence}, {"model", origin.model}}
                 .dump();
    lines += '\n';
  }
  detail::write_file_atomic(sidecar, lines);
}

}  // namespace doremi
