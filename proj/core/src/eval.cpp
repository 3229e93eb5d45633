#include "doremi/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "doremi/error.hpp"
#include "json_io.hpp"

namespace doremi {

using detail::json;

std::vector<fact> gold_facts(const corpus& c) {
  std::vector<fact> out;
  for (const auto& doc : c.documents()) {
    for (const auto& lab : doc.labels) out.push_back({{doc.title, lab.head, lab.tail}, lab.relation});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<fact> matrix_facts(const prediction_matrix& matrix, double threshold) {
  std::vector<fact> out;
  for (const auto& row : matrix.rows()) {
    for (const auto& s : row.scores) {
      if (s.probability >= threshold) out.push_back({row.pair, s.relation});
    }
  }
  return out;
}

void ign_index::add(const std::string& identity, relation_id r) {
  if (mode_ == ign_mode::pair) {
    pairs_.insert(identity);
  } else {
    facts_.emplace(identity, r);
  }
}

bool ign_index::matches(const std::string& identity, relation_id r) const {
  if (mode_ == ign_mode::pair) return pairs_.contains(identity);
  return facts_.contains({identity, r});
}

namespace {

std::string entity_identity(const entity& e) {
  std::set<std::string> names;
  for (const auto& m : e.mentions) {
    std::string folded = m.name;
    std::transform(folded.begin(), folded.end(), folded.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    names.insert(std::move(folded));
  }
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += '\x1f';
    out += n;
  }
  return out;
}

}  // namespace

std::string pair_identity(const document& doc, int head, int tail) {
  return entity_identity(doc.entities.at(static_cast<std::size_t>(head))) + '\x1e' +
         entity_identity(doc.entities.at(static_cast<std::size_t>(tail)));
}

ign_index build_ign_index(const corpus& train, ign_mode mode) {
  ign_index index(mode);
  for (const auto& doc : train.documents()) {
    for (const auto& lab : doc.labels) index.add(pair_identity(doc, lab.head, lab.tail), lab.relation);
  }
  return index;
}

std::string_view to_string(averaging a) { return a == averaging::micro ? "micro" : "macro"; }

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

metric_values micro(std::span<const relation_confusion> counts, const relation_set& slice) {
  relation_confusion sum;
  for (auto r : slice) {
    if (r.index >= counts.size()) continue;
    const auto& c = counts[r.index];
    sum.tp += c.tp;
    sum.fp += c.fp;
    sum.fn += c.fn;
    sum.ign_tp += c.ign_tp;
    sum.ign_fp += c.ign_fp;
    sum.ign_fn += c.ign_fn;
  }
  metric_values v;
  v.precision = ratio(sum.tp, sum.tp + sum.fp);
  v.recall = ratio(sum.tp, sum.tp + sum.fn);
  v.f1 = f1_score(v.precision, v.recall);
  v.ign_precision = ratio(sum.ign_tp, sum.ign_tp + sum.ign_fp);
  v.ign_recall = ratio(sum.ign_tp, sum.ign_tp + sum.ign_fn);
  v.ign_f1 = f1_score(v.ign_precision, v.ign_recall);
  return v;
}

metric_values macro(std::span<const relation_confusion> counts, const relation_set& slice) {
  metric_values v;
  std::size_t active = 0, ign_active = 0;
  for (auto r : slice) {
    if (r.index >= counts.size()) continue;
    const auto& c = counts[r.index];
    if (c.tp + c.fp + c.fn > 0) {
      ++active;
      const double p = ratio(c.tp, c.tp + c.fp);
      const double rc = ratio(c.tp, c.tp + c.fn);
      v.precision += p;
      v.recall += rc;
      v.f1 += f1_score(p, rc);
    }
    if (c.ign_tp + c.ign_fp + c.ign_fn > 0) {
      ++ign_active;
      const double p = ratio(c.ign_tp, c.ign_tp + c.ign_fp);
      const double rc = ratio(c.ign_tp, c.ign_tp + c.ign_fn);
      v.ign_precision += p;
      v.ign_recall += rc;
      v.ign_f1 += f1_score(p, rc);
    }
  }
  if (active > 0) {
    v.precision /= static_cast<double>(active);
    v.recall /= static_cast<double>(active);
    v.f1 /= static_cast<double>(active);
  }
  if (ign_active > 0) {
    v.ign_precision /= static_cast<double>(ign_active);
    v.ign_recall /= static_cast<double>(ign_active);
    v.ign_f1 /= static_cast<double>(ign_active);
  }
  return v;
}

}  // namespace

metrics_report evaluate(std::span<const fact> predictions, const corpus& gold, const ign_index& ign,
                        const std::map<std::string, relation_set>& slices, std::size_t relation_count,
                        const eval_options& options) {
  std::vector<fact> pred(predictions.begin(), predictions.end());
  std::sort(pred.begin(), pred.end());
  pred.erase(std::unique(pred.begin(), pred.end()), pred.end());

  std::unordered_map<entity_pair_key, std::string> identities;
  auto identity_of = [&](const entity_pair_key& key, const document& doc) -> const std::string& {
    auto it = identities.find(key);
    if (it == identities.end()) it = identities.emplace(key, pair_identity(doc, key.head, key.tail)).first;
    return it->second;
  };

  const auto gold_list = gold_facts(gold);
  std::set<fact> gold_set(gold_list.begin(), gold_list.end());

  metrics_report report;
  report.per_relation.assign(relation_count, {});
  auto& counts = report.per_relation;

  for (const auto& f : gold_list) {
    if (f.relation.index >= relation_count) throw validation_error("gold label outside the relation schema");
    auto& c = counts[f.relation.index];
    ++c.fn;
    const bool seen = !ign.empty() && ign.matches(identity_of(f.pair, *gold.find(f.pair.doc_id)), f.relation);
    if (!(options.ign_filter_gold && seen)) ++c.ign_fn;
  }

  for (const auto& f : pred) {
    if (f.relation.index >= relation_count) {
      throw validation_error("prediction for " + to_string(f.pair) + " references a relation outside the schema");
    }
    const document* doc = gold.find(f.pair.doc_id);
    const int n_ents = doc != nullptr ? static_cast<int>(doc->entities.size()) : 0;
    if (doc == nullptr || f.pair.head < 0 || f.pair.tail < 0 || f.pair.head >= n_ents || f.pair.tail >= n_ents) {
      throw precondition_error("prediction " + to_string(f.pair) + " does not resolve in the gold corpus");
    }
    auto& c = counts[f.relation.index];
    const bool correct = gold_set.contains(f);
    if (correct) {
      ++c.tp;
      --c.fn;
    } else {
      ++c.fp;
    }
    const bool seen = !ign.empty() && ign.matches(identity_of(f.pair, *doc), f.relation);
    if (seen) continue;
    if (correct) {
      ++c.ign_tp;
      --c.ign_fn;
    } else {
      ++c.ign_fp;
    }
  }

  relation_set all;
  for (std::size_t i = 0; i < relation_count; ++i) all.insert(relation_id{static_cast<std::uint16_t>(i)});
  auto add_slice = [&](const std::string& name, const relation_set& rels) {
    report.slices[name][averaging::micro] = micro(counts, rels);
    report.slices[name][averaging::macro] = macro(counts, rels);
  };
  add_slice("full", all);
  for (const auto& [name, rels] : slices) {
    if (name != "full") add_slice(name, rels);
  }
  return report;
}

namespace {

const std::pair<const char*, double metric_values::*> kMetricFields[] = {
    {"precision", &metric_values::precision},         {"recall", &metric_values::recall},
    {"f1", &metric_values::f1},                       {"ign_precision", &metric_values::ign_precision},
    {"ign_recall", &metric_values::ign_recall},       {"ign_f1", &metric_values::ign_f1},
};

}  // namespace

void write_report_csv(const metrics_report& report, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "slice,averaging,metric,value\n";
  out << std::setprecision(17);
  for (const auto& [slice, by_avg] : report.slices) {
    for (const auto& [avg, values] : by_avg) {
      for (const auto& [name, member] : kMetricFields) {
        out << slice << ',' << to_string(avg) << ',' << name << ',' << values.*member << '\n';
      }
    }
  }
  detail::write_file_atomic(path, out.str());
}

void write_report_jsonl(const metrics_report& report, const std::filesystem::path& path) {
  std::string out;
  for (const auto& [slice, by_avg] : report.slices) {
    for (const auto& [avg, values] : by_avg) {
      for (const auto& [name, member] : kMetricFields) {
        out += json{{"slice", slice}, {"averaging", to_string(avg)}, {"metric", name}, {"value", values.*member}}
                   .dump();
        out += '\n';
      }
    }
  }
  detail::write_file_atomic(path, out);
}

std::string format_report(const metrics_report& report) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "slice" << std::setw(8) << "avg";
  for (const auto& [name, member] : kMetricFields) out << std::setw(14) << name;
  out << '\n' << std::fixed << std::setprecision(4);
  for (const auto& [slice, by_avg] : report.slices) {
    for (const auto& [avg, values] : by_avg) {
      out << std::setw(20) << slice << std::setw(8) << to_string(avg);
      for (const auto& [name, member] : kMetricFields) out << std::setw(14) << values.*member;
      out << '\n';
    }
  }
  return out.str();
}

score_histogram compute_score_histogram(const prediction_matrix& matrix, std::size_t bins) {
  if (bins < 1) throw argument_error("histogram needs at least one bin");
  score_histogram h;
  h.counts.assign(bins, 0);
  double sum = 0.0;
  for (const auto& row : matrix.rows()) {
    for (const auto& s : row.scores) {
      if (s.probability <= 0.0) continue;
      auto bin = static_cast<std::size_t>(std::floor(s.probability * static_cast<double>(bins)));
      ++h.counts[std::min(bin, bins - 1)];
      sum += s.probability;
      ++h.total;
    }
  }
  if (h.total > 0) {
    h.mean = sum / static_cast<double>(h.total);
    h.mean_defined = true;
  }
  return h;
}

void write_histogram_csv(const score_histogram& h, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "bin_low,bin_high,count\n" << std::setprecision(17);
  const double width = 1.0 / static_cast<double>(h.counts.size());
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << width * static_cast<double>(i) << ',' << width * static_cast<double>(i + 1) << ',' << h.counts[i] << '\n';
  }
  out << "# mean," << (h.mean_defined ? std::to_string(h.mean) : "undefined") << ",total=" << h.total << '\n';
  detail::write_file_atomic(path, out.str());
}

}  // namespace doremi
