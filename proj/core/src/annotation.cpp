#include "doremi/annotation.hpp"

#include <algorithm>

#include "doremi/error.hpp"
#include "json_io.hpp"

namespace doremi {

using detail::field;
using detail::json;

std::int64_t utc_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void annotation_pool::append(annotation_record record) {
  if (index_.contains(record.pair)) {
    throw conflict_error("pair " + to_string(record.pair) + " is already annotated");
  }
  if (budget_ && records_.size() >= *budget_) {
    throw precondition_error("annotation budget of " + std::to_string(*budget_) + " exhausted");
  }
  index_.emplace(record.pair, records_.size());
  records_.push_back(std::move(record));
}

const annotation_record* annotation_pool::find(const entity_pair_key& pair) const {
  auto it = index_.find(pair);
  return it == index_.end() ? nullptr : &records_[it->second];
}

pair_set annotation_pool::annotated_pairs() const {
  pair_set out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.insert(r.pair);
  return out;
}

namespace {

json record_json(const annotation_record& r, const relation_schema& schema) {
  json labels = json::array();
  for (auto rel : r.labels) labels.push_back(schema.code(rel));
  return {{"title", r.pair.doc_id},      {"h_idx", r.pair.head},      {"t_idx", r.pair.tail},
          {"labels", std::move(labels)}, {"annotator", r.annotator}, {"iteration", r.iteration},
          {"timestamp", r.timestamp_ms}};
}

annotation_record record_from_json(const json& rec, const relation_schema& schema, const std::string& ctx) {
  annotation_record r;
  r.pair = {field<std::string>(rec, "title", ctx), field<int>(rec, "h_idx", ctx), field<int>(rec, "t_idx", ctx)};
  if (r.pair.head == r.pair.tail) throw validation_error(ctx + ": head == tail");
  for (const auto& code : field<std::vector<std::string>>(rec, "labels", ctx)) {
    auto rel = schema.find(code);
    if (!rel) throw validation_error(ctx + ": unknown relation id '" + code + "'");
    r.labels.insert(*rel);
  }
  r.annotator = rec.contains("annotator") ? field<std::string>(rec, "annotator", ctx) : std::string();
  r.iteration = rec.contains("iteration") ? field<int>(rec, "iteration", ctx) : 0;
  r.timestamp_ms = rec.contains("timestamp") ? field<std::int64_t>(rec, "timestamp", ctx) : 0;
  return r;
}

}  // namespace

annotation_log::annotation_log(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw io_error("cannot open annotation log " + path_.string());
}

void annotation_log::append(const annotation_record& record, const relation_schema& schema) {
  auto event = record_json(record, schema);
  event["event"] = "annotation";
  out_ << event.dump() << '\n';
  out_.flush();
  if (!out_) throw io_error("write to annotation log " + path_.string() + " failed");
}

annotation_pool annotation_log::replay(const std::filesystem::path& path, const relation_schema& schema,
                                       std::optional<std::size_t> budget) {
  annotation_pool pool(budget);
  if (!std::filesystem::exists(path)) return pool;
  detail::for_each_jsonl(path, [&](const json& rec, std::size_t line_no) {
    const std::string ctx = path.string() + " event " + std::to_string(line_no);
    if (field<std::string>(rec, "event", ctx) != "annotation") return;
    pool.append(record_from_json(rec, schema, ctx));
  });
  return pool;
}

void annotation_queue::enqueue_batch(const sample_batch& batch, const annotation_pool& pool) {
  pair_set incoming;
  for (const auto& item : batch.items) {
    if (pool.contains(item.pair)) throw conflict_error("pair " + to_string(item.pair) + " is already annotated");
    if (is_pending(item.pair) || !incoming.insert(item.pair).second) {
      throw conflict_error("pair " + to_string(item.pair) + " is already queued");
    }
  }
  for (const auto& item : batch.items) pending_.push_back({item.pair, item.score, batch.iteration});
}

std::optional<lease> annotation_queue::lease_next(const std::string& annotator, clock::time_point now) {
  for (const auto& item : pending_) {
    auto it = leases_.find(item.pair);
    if (it != leases_.end() && it->second.expires > now) continue;
    lease l{item, annotator, now + lease_timeout_};
    leases_[item.pair] = l;
    return l;
  }
  return std::nullopt;
}

bool annotation_queue::is_leased(const entity_pair_key& pair, clock::time_point now) const {
  auto it = leases_.find(pair);
  return it != leases_.end() && it->second.expires > now;
}

bool annotation_queue::is_pending(const entity_pair_key& pair) const {
  return std::any_of(pending_.begin(), pending_.end(), [&](const queue_item& q) { return q.pair == pair; });
}

const annotation_record& annotation_queue::submit(const entity_pair_key& pair, relation_set labels,
                                                  const std::string& annotator, annotation_pool& pool,
                                                  std::size_t relation_count, std::int64_t timestamp_ms) {
  auto it = std::find_if(pending_.begin(), pending_.end(), [&](const queue_item& q) { return q.pair == pair; });
  if (it == pending_.end()) throw precondition_error("pair " + to_string(pair) + " is not pending annotation");
  for (auto r : labels) {
    if (r.index >= relation_count) throw validation_error("label outside the relation schema");
  }
  annotation_record record{pair, std::move(labels), annotator, it->iteration, timestamp_ms};
  pool.append(std::move(record));
  pending_.erase(it);
  leases_.erase(pair);
  return pool.records().back();
}

augmented_training training_augment(const annotation_pool& pool, const corpus& ha, const corpus& ds) {
  augmented_training out;
  std::map<std::string, std::vector<const annotation_record*>> by_doc;
  for (const auto& r : pool.records()) {
    if (r.is_na()) {
      out.negatives.push_back(r.pair);
    } else {
      by_doc[r.pair.doc_id].push_back(&r);
    }
  }
  std::vector<document> docs(ha.documents().begin(), ha.documents().end());
  for (const auto& doc : ds.documents()) {
    auto it = by_doc.find(doc.title);
    if (it == by_doc.end()) continue;
    document copy = doc;
    copy.labels.clear();
    // Pair order, not submission order, so serve and batch runs train alike.
    std::sort(it->second.begin(), it->second.end(),
              [](const annotation_record* a, const annotation_record* b) { return a->pair < b->pair; });
    for (const auto* r : it->second) {
      for (auto rel : r->labels) copy.labels.push_back({r->pair.head, r->pair.tail, rel, {}});
    }
    docs.push_back(std::move(copy));
    by_doc.erase(it);
  }
  if (!by_doc.empty()) {
    throw precondition_error("annotated document '" + by_doc.begin()->first + "' is not in the distant corpus");
  }
  std::sort(out.negatives.begin(), out.negatives.end());
  out.train = corpus(split_tag::ha, std::move(docs));
  return out;
}

round_stats compute_round_stats(const annotation_pool& pool, const relation_set& long_tail) {
  round_stats stats;
  for (const auto& r : pool.records()) {
    auto& bucket = stats.per_iteration[r.iteration];
    if (r.is_na()) {
      ++bucket.na;
      ++stats.totals.na;
    } else if (std::any_of(r.labels.begin(), r.labels.end(), [&](relation_id x) { return long_tail.contains(x); })) {
      ++bucket.long_tail;
      ++stats.totals.long_tail;
    } else {
      ++bucket.frequent;
      ++stats.totals.frequent;
    }
  }
  return stats;
}

std::vector<annotation_record> read_annotations(const std::filesystem::path& path, const relation_schema& schema) {
  std::vector<annotation_record> out;
  detail::for_each_jsonl(path, [&](const json& rec, std::size_t line_no) {
    out.push_back(record_from_json(rec, schema, path.string() + " record " + std::to_string(line_no)));
  });
  return out;
}

void write_annotations(std::span<const annotation_record> records, const relation_schema& schema,
                       const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += record_json(r, schema).dump();
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

file_annotation_source::file_annotation_source(std::span<const annotation_record> records) {
  for (const auto& r : records) {
    if (!labels_.emplace(r.pair, r.labels).second) {
      throw validation_error("annotation file has two records for " + to_string(r.pair));
    }
  }
}

std::optional<relation_set> file_annotation_source::labels_for(const entity_pair_key& pair) const {
  auto it = labels_.find(pair);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

gold_annotation_source::gold_annotation_source(std::shared_ptr<const corpus> truth) : truth_(std::move(truth)) {
  if (!truth_) throw argument_error("gold annotation source needs a corpus");
}

std::optional<relation_set> gold_annotation_source::labels_for(const entity_pair_key& pair) const {
  const document* doc = truth_->find(pair.doc_id);
  if (doc == nullptr) return std::nullopt;
  relation_set out;
  for (const auto& lab : doc->labels) {
    if (lab.head == pair.head && lab.tail == pair.tail) out.insert(lab.relation);
  }
  return out;
}

}  // namespace doremi
