#include "doremi/sampler.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <thread>

#include "doremi/error.hpp"
#include "json_io.hpp"

namespace doremi {

using detail::field;
using detail::json;

void sampler_config::validate() const {
  if (k < 1) throw argument_error("sample size k must be >= 1");
  if (long_tail.empty()) throw argument_error("long-tail relation set is empty");
  if (max_per_doc && *max_per_doc < 1) throw argument_error("max_per_doc must be >= 1");
}

bool ranks_before(const scored_pair& a, const scored_pair& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.pair < b.pair;
}

std::vector<entity_pair_key> candidate_pairs(std::span<const prediction_matrix> matrices, const model_pool& pool,
                                             const relation_set& long_tail) {
  if (matrices.size() != pool.size()) throw argument_error("one prediction matrix per pool model required");
  std::vector<entity_pair_key> out;
  for (std::size_t m = 0; m < matrices.size(); ++m) {
    const double threshold = pool[m].decision_threshold;
    for (const auto& row : matrices[m].rows()) {
      for (const auto& s : row.scores) {
        if (s.probability >= threshold && long_tail.contains(s.relation)) {
          out.push_back(row.pair);
          break;
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

// Heap comparator: "a is better than b" keeps the worst entry at the front.
bool heap_order(const scored_pair& a, const scored_pair& b) { return ranks_before(a, b); }

}  // namespace

top_k_selector::top_k_selector(std::size_t k) : k_(k) {
  if (k_ < 1) throw argument_error("top-k selector needs k >= 1");
  heap_.reserve(k_ + 1);
}

void top_k_selector::push(const scored_pair& item) {
  if (heap_.size() < k_) {
    heap_.push_back(item);
    std::push_heap(heap_.begin(), heap_.end(), heap_order);
    return;
  }
  if (!ranks_before(item, heap_.front())) return;
  std::pop_heap(heap_.begin(), heap_.end(), heap_order);
  heap_.back() = item;
  std::push_heap(heap_.begin(), heap_.end(), heap_order);
}

void top_k_selector::merge(const top_k_selector& other) {
  for (const auto& item : other.heap_) push(item);
}

std::vector<scored_pair> top_k_selector::sorted() const {
  auto out = heap_;
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

sample_batch select_top_k(std::span<const scored_pair> scored, const sampler_config& cfg, const pair_set& annotated,
                          int iteration, unsigned shards) {
  cfg.validate();
  sample_batch batch;
  batch.iteration = iteration;

  std::vector<scored_pair> chosen;
  if (cfg.max_per_doc) {
    // A per-document cap interacts with the ranking, so fall back to a full sort.
    std::vector<scored_pair> eligible;
    for (const auto& s : scored) {
      if (!annotated.contains(s.pair)) eligible.push_back(s);
    }
    std::sort(eligible.begin(), eligible.end(), ranks_before);
    std::map<std::string, std::size_t> per_doc;
    for (const auto& s : eligible) {
      if (chosen.size() == cfg.k) break;
      auto& used = per_doc[s.pair.doc_id];
      if (used >= *cfg.max_per_doc) continue;
      ++used;
      chosen.push_back(s);
    }
  } else {
    shards = std::max(1u, std::min<unsigned>(shards, static_cast<unsigned>(std::max<std::size_t>(1, scored.size()))));
    std::vector<top_k_selector> local(shards, top_k_selector(cfg.k));
    const std::size_t chunk = (scored.size() + shards - 1) / shards;
    auto work = [&](unsigned t) {
      const std::size_t begin = std::min(scored.size(), t * chunk);
      const std::size_t end = std::min(scored.size(), begin + chunk);
      for (std::size_t i = begin; i < end; ++i) {
        if (!annotated.contains(scored[i].pair)) local[t].push(scored[i]);
      }
    };
    if (shards == 1) {
      work(0);
    } else {
      std::vector<std::thread> workers;
      for (unsigned t = 0; t < shards; ++t) workers.emplace_back(work, t);
      for (auto& w : workers) w.join();
    }
    for (unsigned t = 1; t < shards; ++t) local[0].merge(local[t]);
    chosen = local[0].sorted();
  }

  batch.shortfall = chosen.size() < cfg.k;
  batch.items.reserve(chosen.size());
  for (auto& s : chosen) batch.items.push_back({std::move(s.pair), s.score, {}});
  return batch;
}

sample_batch select_top_k(std::span<const entity_pair_key> candidates,
                          const std::unordered_map<entity_pair_key, double>& scores, const sampler_config& cfg,
                          const pair_set& annotated, int iteration) {
  std::vector<scored_pair> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto it = scores.find(c);
    if (it == scores.end()) throw precondition_error("no score for candidate " + to_string(c));
    scored.push_back({c, it->second});
  }
  return select_top_k(scored, cfg, annotated, iteration);
}

sample_batch select_random(std::span<const entity_pair_key> universe, std::size_t k, const pair_set& annotated,
                           int iteration, std::uint64_t seed) {
  if (k < 1) throw argument_error("sample size k must be >= 1");
  std::vector<entity_pair_key> eligible;
  for (const auto& p : universe) {
    if (!annotated.contains(p)) eligible.push_back(p);
  }
  std::sort(eligible.begin(), eligible.end());
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates; std::shuffle's exact permutation is library-specific.
  const std::size_t take = std::min(k, eligible.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
    std::swap(eligible[i], eligible[pick(rng)]);
  }
  sample_batch batch;
  batch.iteration = iteration;
  batch.shortfall = take < k;
  for (std::size_t i = 0; i < take; ++i) batch.items.push_back({eligible[i], 0.0, {}});
  return batch;
}

void attach_predictions(sample_batch& batch, std::span<const prediction_matrix> matrices, const model_pool& pool) {
  if (matrices.size() != pool.size()) throw argument_error("one prediction matrix per pool model required");
  for (auto& item : batch.items) {
    item.predicted.clear();
    for (std::size_t m = 0; m < matrices.size(); ++m) {
      item.predicted.emplace_back(pool[m].name,
                                  predicted_relations(matrices[m], item.pair, pool[m].decision_threshold));
    }
  }
}

namespace {

json entity_json(const entity& e) {
  json mentions = json::array();
  for (const auto& m : e.mentions) {
    mentions.push_back({{"sent_id", m.sentence}, {"pos", {m.start, m.end}}, {"name", m.name}});
  }
  return {{"index", e.index}, {"type", e.type}, {"mentions", std::move(mentions)}};
}

}  // namespace

void write_sample_batch(const sample_batch& batch, const corpus& ds, const relation_schema& schema,
                        const std::filesystem::path& path) {
  std::string out;
  for (std::size_t rank = 0; rank < batch.items.size(); ++rank) {
    const auto& item = batch.items[rank];
    const document* doc = ds.find(item.pair.doc_id);
    if (doc == nullptr) throw precondition_error("sampled pair " + to_string(item.pair) + " not in corpus");
    json predictions = json::array();
    for (const auto& [model, rels] : item.predicted) {
      json codes = json::array();
      for (auto r : rels) codes.push_back(schema.code(r));
      predictions.push_back({{"model", model}, {"relations", std::move(codes)}});
    }
    json rec = {{"iteration", batch.iteration},
                {"rank", rank},
                {"title", item.pair.doc_id},
                {"h_idx", item.pair.head},
                {"t_idx", item.pair.tail},
                {"score", item.score},
                {"sents", doc->sentences},
                {"head", entity_json(doc->entities.at(static_cast<std::size_t>(item.pair.head)))},
                {"tail", entity_json(doc->entities.at(static_cast<std::size_t>(item.pair.tail)))},
                {"predictions", std::move(predictions)}};
    out += rec.dump();
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

sample_batch read_sample_batch(const std::filesystem::path& path, const relation_schema& schema) {
  sample_batch batch;
  bool first = true;
  detail::for_each_jsonl(path, [&](const json& rec, std::size_t line_no) {
    const std::string ctx = path.string() + " record " + std::to_string(line_no);
    const int iteration = field<int>(rec, "iteration", ctx);
    if (first) {
      batch.iteration = iteration;
      first = false;
    } else if (iteration != batch.iteration) {
      throw validation_error(ctx + ": mixed iterations in one batch file");
    }
    sample_item item;
    item.pair = {field<std::string>(rec, "title", ctx), field<int>(rec, "h_idx", ctx), field<int>(rec, "t_idx", ctx)};
    item.score = field<double>(rec, "score", ctx);
    if (auto it = rec.find("predictions"); it != rec.end() && it->is_array()) {
      for (const auto& entry : *it) {
        relation_set rels;
        for (const auto& c : field<std::vector<std::string>>(entry, "relations", ctx)) rels.insert(schema.at(c));
        item.predicted.emplace_back(field<std::string>(entry, "model", ctx), std::move(rels));
      }
    }
    batch.items.push_back(std::move(item));
  });
  return batch;
}

}  // namespace doremi
