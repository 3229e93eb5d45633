#include "doremi/synthetic.hpp"

#include <algorithm>

#include "doremi/error.hpp"

namespace doremi {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a; std::hash<std::string> is not stable across library versions.
std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Counter-based uniform in [0,1): one independent draw per
// (seed, document, head, tail, relation, stream).
class draw_stream {
 public:
  draw_stream(std::uint64_t seed, const entity_pair_key& pair)
      : base_(splitmix64(splitmix64(seed ^ stable_hash(pair.doc_id)) ^
                         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(pair.head)) << 32 |
                          static_cast<std::uint32_t>(pair.tail)))) {}

  double uniform(relation_id r, std::uint64_t stream) const {
    auto bits = splitmix64(base_ ^ splitmix64((static_cast<std::uint64_t>(r.index) << 8) | stream));
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t base_;
};

double triangular(double centre, double half_width, double u1, double u2) {
  return std::clamp(centre + half_width * (u1 + u2 - 1.0), 0.0, 1.0);
}

}  // namespace

void synthetic_params::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(confidence_mean)) throw argument_error("confidence_mean outside [0,1]");
  if (!(confidence_spread >= 0.0)) throw argument_error("confidence_spread must be >= 0");
  if (!prob(flip_rate)) throw argument_error("flip_rate outside [0,1]");
  if (!prob(negative_flip_scale)) throw argument_error("negative_flip_scale outside [0,1]");
  for (const auto& [r, f] : per_relation_skill) {
    if (!prob(f)) throw argument_error("per-relation flip rate outside [0,1]");
  }
}

double synthetic_params::flip_for(relation_id r) const {
  auto it = per_relation_skill.find(r);
  return it == per_relation_skill.end() ? flip_rate : it->second;
}

prediction_matrix synthetic_model(const corpus& gold, const synthetic_params& params,
                                  const relation_schema& schema, std::string model, int iteration,
                                  const memorized_labels* memorized) {
  params.validate();
  const auto n_rel = schema.size();
  std::vector<double> pos_flip(n_rel), neg_flip(n_rel);
  for (std::size_t i = 0; i < n_rel; ++i) {
    pos_flip[i] = params.flip_for(relation_id{static_cast<std::uint16_t>(i)});
    neg_flip[i] = pos_flip[i] * params.negative_flip_scale;
  }

  std::vector<prediction_row> rows;
  std::vector<char> truth(n_rel);
  for (const auto& doc : gold.documents()) {
    for (auto& pair : enumerate_pairs(doc)) {
      std::fill(truth.begin(), truth.end(), 0);
      const relation_set* known = nullptr;
      if (memorized != nullptr) {
        if (auto it = memorized->find(pair); it != memorized->end()) known = &it->second;
      }
      if (known != nullptr) {
        for (auto r : *known) truth[r.index] = 1;
      } else {
        for (const auto& lab : doc.labels) {
          if (lab.head == pair.head && lab.tail == pair.tail) truth[lab.relation.index] = 1;
        }
      }

      draw_stream draws(params.seed, pair);
      prediction_row row{pair, {}};
      for (std::size_t i = 0; i < n_rel; ++i) {
        const relation_id r{static_cast<std::uint16_t>(i)};
        const bool is_true = truth[i] != 0;
        const double flip = known != nullptr ? 0.0 : (is_true ? pos_flip[i] : neg_flip[i]);
        const bool positive_side = is_true != (draws.uniform(r, 0) < flip);
        const double centre = positive_side ? params.confidence_mean : 1.0 - params.confidence_mean;
        const double p = triangular(centre, params.confidence_spread, draws.uniform(r, 1), draws.uniform(r, 2));
        if (p >= prediction_matrix::storage_floor) row.scores.push_back({r, p});
      }
      if (!row.scores.empty()) rows.push_back(std::move(row));
    }
  }
  return prediction_matrix(std::move(model), iteration, std::move(rows));
}

synthetic_params trained_params(const synthetic_params& base, const corpus& train,
                                const relation_schema& schema, const synthetic_learning& learning) {
  if (!(learning.learning_scale > 0.0)) throw argument_error("learning_scale must be > 0");
  auto counts = relation_frequencies(train, schema.size());
  synthetic_params out = base;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const relation_id r{static_cast<std::uint16_t>(i)};
    const double n = static_cast<double>(counts.counts[i]);
    out.per_relation_skill[r] = base.flip_for(r) * learning.learning_scale / (learning.learning_scale + n);
  }
  return out;
}

memorized_labels memorize(const corpus& train, std::span<const entity_pair_key> negatives) {
  memorized_labels out;
  for (const auto& doc : train.documents()) {
    for (const auto& lab : doc.labels) out[{doc.title, lab.head, lab.tail}].insert(lab.relation);
  }
  for (const auto& key : negatives) out.try_emplace(key);
  return out;
}

}  // namespace doremi
