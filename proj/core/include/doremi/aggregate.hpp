#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "doremi/corpus.hpp"
#include "doremi/eval.hpp"
#include "doremi/predictions.hpp"

namespace doremi {

struct aggregation_config {
  double tau = 0.7;

  void validate() const;
};

struct label_provenance {
  double max_confidence = 0.0;
  std::string model;

  bool operator==(const label_provenance&) const = default;
};

// Denoised distantly supervised labels: pair -> relation set, plus where each
// label came from.
struct denoised_dataset {
  std::map<entity_pair_key, relation_set> labels;
  std::map<fact, label_provenance> provenance;

  std::size_t label_count() const;
  std::vector<fact> facts() const;
  void insert(const fact& f, std::optional<label_provenance> origin = std::nullopt);

  bool operator==(const denoised_dataset&) const = default;
};

// Keeps (pair, r) iff some model scores it strictly above tau. Provenance names
// the first model (pool order) reaching the maximum.
denoised_dataset aggregate_labels(std::span<const prediction_matrix> matrices, const aggregation_config& cfg);

// Distinct (pair, relation) entries stored by any model; the denominator of
// the retention fraction.
std::size_t predicted_label_count(std::span<const prediction_matrix> matrices);

// Long-tail labels from `dds`, every other relation from `other`.
denoised_dataset hybrid_merge(const denoised_dataset& dds, const denoised_dataset& other,
                              const relation_set& long_tail);

denoised_dataset dds_from_corpus(const corpus& c);

// DocRED-format file whose documents are `ds` with their labels replaced by
// the aggregated ones. Provenance goes to a JSONL sidecar; by default
// "provenance.jsonl" next to `path`.
void write_dds(const denoised_dataset& dds, const corpus& ds, const relation_schema& schema,
               const std::filesystem::path& path, std::optional<std::filesystem::path> provenance_path = std::nullopt);

corpus dds_corpus(const denoised_dataset& dds, const corpus& ds);

}  // namespace doremi
