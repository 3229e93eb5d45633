#include "doremi/service/server.hpp"

#include <httplib.h>

#include "doremi/annotation.hpp"
#include "doremi/error.hpp"

namespace doremi::service {

using json = nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  reply(res, status, extra);
}

const document* find_document(const loop_inputs& in, const std::string& id) {
  for (const auto* c : {in.ds.get(), in.ha.get(), in.dev.get()}) {
    if (const auto* doc = c->find(id)) return doc;
  }
  return nullptr;
}

json document_json(const document& doc, const relation_schema& schema) {
  return corpus_to_json(corpus(split_tag::ds, {doc}), schema).at(0);
}

json relation_codes(const relation_set& rels, const relation_schema& schema) {
  json out = json::array();
  for (auto r : rels) out.push_back(schema.code(r));
  return out;
}

json item_json(const loop_runner& runner, const lease& l) {
  const auto& in = runner.inputs();
  const auto& pair = l.item.pair;
  json j = {{"title", pair.doc_id},
            {"h_idx", pair.head},
            {"t_idx", pair.tail},
            {"score", l.item.score},
            {"iteration", l.item.iteration},
            {"annotator", l.annotator},
            {"lease_seconds",
             std::chrono::duration_cast<std::chrono::seconds>(l.expires - annotation_queue::clock::now()).count()}};
  if (const auto* doc = in.ds->find(pair.doc_id)) {
    auto d = document_json(*doc, in.schema);
    j["head"] = d["vertexSet"].at(static_cast<std::size_t>(pair.head));
    j["tail"] = d["vertexSet"].at(static_cast<std::size_t>(pair.tail));
    j["document"] = std::move(d);
  }
  json preds = json::array();
  if (const auto& batch = runner.current_batch()) {
    for (const auto& item : batch->items) {
      if (item.pair != pair) continue;
      for (const auto& [model, rels] : item.predicted) {
        preds.push_back({{"model", model}, {"relations", relation_codes(rels, in.schema)}});
      }
    }
  }
  j["predictions"] = std::move(preds);
  return j;
}

}  // namespace

json status_json(const loop_runner& runner, const std::string& run_id, bool training) {
  const auto& st = runner.state();
  const auto& cfg = runner.config();
  const auto stats = compute_round_stats(runner.pool(), cfg.sampler.long_tail);
  json rounds = json::array();
  for (const auto& [it, c] : stats.per_iteration) {
    rounds.push_back({{"iteration", it}, {"long_tail", c.long_tail}, {"frequent", c.frequent}, {"na", c.na},
                      {"total", c.total()}});
  }
  const auto& t = stats.totals;
  return {{"run_id", run_id},
          {"iteration", st.iteration},
          {"budget_used", runner.pool().budget_used()},
          {"budget", cfg.budget},
          {"k", cfg.sampler.k},
          {"mean_disagreement", st.mean_disagreement},
          {"mean_history", st.mean_history},
          {"candidate_history", st.candidate_history},
          {"stop", to_string(runner.status())},
          {"batch_open", runner.current_batch().has_value()},
          {"pending", runner.queue().size()},
          {"training", training},
          {"dds_written", std::filesystem::exists(runner.run_dir() / "dds" / "dds.json")},
          {"round_stats",
           {{"per_iteration", rounds},
            {"totals", {{"long_tail", t.long_tail}, {"frequent", t.frequent}, {"na", t.na}, {"total", t.total()}}}}}};
}

annotation_server::annotation_server(loop_runner& runner, server_options options)
    : runner_(runner), options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  refresh_snapshot(false);
  install_routes();
}

annotation_server::~annotation_server() { stop(); }

int annotation_server::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  if (!http_->bind_to_port(host, port)) throw io_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

bool annotation_server::serve() { return http_->listen_after_bind(); }

void annotation_server::stop() {
  if (http_) http_->stop();
}

void annotation_server::wait_until_ready() const { http_->wait_until_ready(); }

json annotation_server::status() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void annotation_server::refresh_snapshot(bool training) {
  auto snap = status_json(runner_, options_.run_id, training);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(snap);
}

void annotation_server::install_routes() {
  auto& http = *http_;

  if (options_.token) {
    http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (req.path.rfind("/api/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("Authorization") == "Bearer " + *options_.token) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      reply_error(res, 401, "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    });
  }
  if (options_.static_dir) http.set_mount_point("/", options_.static_dir->string());

  http.Get("/api/status", [this](const httplib::Request&, httplib::Response& res) { reply(res, 200, status()); });

  http.Get("/api/relations", [this](const httplib::Request&, httplib::Response& res) {
    const auto& in = runner_.inputs();
    json out = json::array();
    for (auto r : in.schema.relations()) {
      out.push_back({{"code", in.schema.code(r)},
                     {"name", in.schema.name(r)},
                     {"long_tail", runner_.config().sampler.long_tail.contains(r)}});
    }
    reply(res, 200, out);
  });

  http.Get(R"(/api/docs/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto id = req.matches[1].str();
    const auto* doc = find_document(runner_.inputs(), id);
    if (doc == nullptr) return reply_error(res, 404, "no document '" + id + "'");
    reply(res, 200, document_json(*doc, runner_.inputs().schema));
  });

  http.Get("/api/queue/next", [this](const httplib::Request& req, httplib::Response& res) {
    std::unique_lock lock(run_mutex_, std::try_to_lock);
    if (!lock) return reply_error(res, 503, "training in progress");
    const auto annotator = req.has_param("annotator") ? req.get_param_value("annotator") : std::string("anonymous");
    auto l = runner_.queue().lease_next(annotator);
    if (!l) {
      return reply(res, 200, {{"item", nullptr}, {"pending", runner_.queue().size()}, {"stop", to_string(runner_.status())}});
    }
    reply(res, 200, {{"item", item_json(runner_, *l)}, {"pending", runner_.queue().size()}});
  });

  http.Post("/api/annotations", [this](const httplib::Request& req, httplib::Response& res) {
    entity_pair_key pair;
    relation_set labels;
    std::string annotator;
    try {
      const auto body = json::parse(req.body);
      pair.doc_id = body.at("title").get<std::string>();
      pair.head = body.at("h_idx").get<int>();
      pair.tail = body.at("t_idx").get<int>();
      for (const auto& code : body.at("labels")) labels.insert(runner_.inputs().schema.at(code.get<std::string>()));
      annotator = body.value("annotator", std::string("anonymous"));
    } catch (const json::exception& e) {
      return reply_error(res, 400, std::string("malformed annotation: ") + e.what());
    } catch (const validation_error& e) {
      return reply_error(res, 400, e.what());
    }

    {
      std::unique_lock lock(run_mutex_, std::try_to_lock);
      if (!lock) return reply_error(res, 503, "training in progress");
      if (!runner_.queue().is_leased(pair)) {
        return reply_error(res, 409, "pair " + to_string(pair) + " is not leased; fetch it from /api/queue/next first");
      }
      try {
        runner_.submit(pair, std::move(labels), annotator);
      } catch (const precondition_error& e) {
        return reply_error(res, 409, e.what());
      } catch (const conflict_error& e) {
        return reply_error(res, 409, e.what());
      } catch (const validation_error& e) {
        return reply_error(res, 400, e.what());
      }
    }
    refresh_snapshot(false);
    auto snap = status();
    reply(res, 200, {{"ok", true}, {"budget_used", snap["budget_used"]}, {"pending", snap["pending"]}});
  });

  http.Post("/api/iterations/advance", [this](const httplib::Request&, httplib::Response& res) {
    std::unique_lock lock(run_mutex_, std::try_to_lock);
    if (!lock) return reply_error(res, 409, "an iteration is already training");
    if (!runner_.queue().empty()) {
      return reply_error(res, 409, "sampled pairs still await annotation", {{"pending", runner_.queue().size()}});
    }
    if (!runner_.current_batch()) {
      return reply_error(res, 409, "no open batch; the loop has stopped", {{"stop", to_string(runner_.status())}});
    }
    refresh_snapshot(true);
    try {
      runner_.run_iteration();
      if (runner_.status() == stop_decision::continue_loop) {
        try {
          runner_.prepare_batch();
        } catch (const precondition_error&) {
          // exhausted candidates; status now reports the stop
        }
      }
      if (runner_.status() != stop_decision::continue_loop) runner_.finish();
    } catch (const adapter_error& e) {
      refresh_snapshot(false);
      return reply_error(res, 500, e.what(), {{"diagnostics", e.diagnostics()}});
    } catch (const std::exception& e) {
      refresh_snapshot(false);
      return reply_error(res, 500, e.what());
    }
    refresh_snapshot(false);
    reply(res, 200, status());
  });
}

}  // namespace doremi::service
