#pragma once

// JSON-over-HTTP binding of IngestService, plus a small client used by the
// simulator and the tests.

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ewellness/service.hpp"
#include "httplib.h"

namespace ewellness {

namespace detail {

inline std::string bearer(const httplib::Request& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) throw AuthError("missing bearer token");
  return h.substr(prefix.size());
}

inline void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline nlohmann::json error_body(std::string_view kind, const std::string& message, const std::string& field = {}) {
  nlohmann::json e{{"kind", kind}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  return {{"error", e}};
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("body", "expected a JSON object");
  return j;
}

inline std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Maps the error hierarchy onto status codes.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const ValidationError& e) {
    reply(res, 400, error_body("validation", e.what(), e.field()));
  } catch (const AuthError& e) {
    reply(res, 401, error_body("auth", e.what()));
  } catch (const ForbiddenError& e) {
    reply(res, 403, error_body("forbidden", e.what()));
  } catch (const NotFoundError& e) {
    reply(res, 404, error_body("not_found", e.what()));
  } catch (const nlohmann::json::exception& e) {
    reply(res, 400, error_body("validation", e.what()));
  } catch (const std::exception& e) {
    reply(res, 500, error_body("internal", e.what()));
  }
}

}  // namespace detail

inline nlohmann::json to_json(const BatchResult& r) {
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : r.errors) errors.push_back({{"index", e.index}, {"message", e.message}});
  return {{"accepted", r.accepted}, {"errors", errors}};
}

class HttpServer {
 public:
  explicit HttpServer(IngestService& service) : service_(service) { routes(); }

  // Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  // Blocks until stop().
  void serve() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  void routes() {
    using detail::guarded;
    using detail::reply;
    using httplib::Request;
    using httplib::Response;

    server_.Get("/v1/healthz", [](const Request&, Response& res) { reply(res, 200, {{"ok", true}}); });

    server_.Post("/v1/participants", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto body = detail::parse_body(req);
        const auto& tz = body.at("tz_offset_minutes");
        if (!tz.is_number_integer()) throw ValidationError("tz_offset_minutes", "expected an integer");
        const auto reg = service_.register_participant(tz.get<int>());
        reply(res, 201, {{"id", reg.record.id.str()}, {"token", reg.token}});
      });
    });

    server_.Post("/v1/events", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto token = detail::bearer(req);
        const auto body = detail::parse_body(req);
        if (!body.contains("events")) throw ValidationError("events", "missing");
        reply(res, 200, to_json(service_.submit_event_batch(token, body["events"])));
      });
    });

    server_.Post("/v1/ema", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto token = detail::bearer(req);
        const auto body = detail::parse_body(req);
        if (!body.contains("at")) throw ValidationError("at", "missing");
        const auto& at = body["at"];
        if (!at.is_number_integer()) throw ValidationError("at", "expected epoch milliseconds");
        if (!body.contains("items") || !body["items"].is_array()) throw ValidationError("items", "expected an array");
        std::vector<int> items;
        for (std::size_t i = 0; i < body["items"].size(); ++i) {
          const auto& v = body["items"][i];
          if (!v.is_number_integer()) throw ValidationError("items[" + std::to_string(i) + "]", "expected an integer");
          items.push_back(v.get<int>());
        }
        const auto r = service_.submit_ema(token, at.get<std::int64_t>(), std::move(items));
        reply(res, 200, {{"score", r.score}, {"level", std::string(to_string(r.level))}});
      });
    });

    server_.Get("/v1/events", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto token = detail::bearer(req);
        if (!req.has_param("participant")) throw ValidationError("participant", "missing");
        const ParticipantId who(req.get_param_value("participant"));
        const LocalDay from = req.has_param("from_day") ? LocalDay::parse(req.get_param_value("from_day")) : kFirstDay;
        const LocalDay to = req.has_param("to_day") ? LocalDay::parse(req.get_param_value("to_day")) : kLastDay;
        KindFilter kinds;
        bool want_emas = true;
        if (req.has_param("kinds")) {
          want_emas = false;
          for (const auto& name : detail::split_csv(req.get_param_value("kinds"))) {
            if (name == "ema") {
              want_emas = true;
            } else if (auto k = parse_event_kind(name)) {
              kinds.insert(*k);
            } else {
              throw ValidationError("kinds", "unknown kind '" + name + "'");
            }
          }
        }
        nlohmann::json out{{"events", nlohmann::json::array()}};
        const bool want_events = !req.has_param("kinds") || !kinds.empty();
        if (want_events) {
          for (const auto& e : service_.query_events(token, who, from, to, kinds)) out["events"].push_back(wire::to_json(e));
        }
        if (want_emas) {
          out["emas"] = nlohmann::json::array();
          for (const auto& r : service_.query_emas(token, who, from, to)) out["emas"].push_back(wire::to_json(r));
        }
        reply(res, 200, out);
      });
    });

    server_.Get("/v1/dataset", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto token = detail::bearer(req);
        std::vector<ParticipantId> cohort;
        for (const auto& id : detail::split_csv(req.get_param_value("participants"))) cohort.emplace_back(id);
        res.status = 200;
        res.set_content(dataset_json_string(service_.export_dataset(token, cohort)), "application/json");
      });
    });
  }

  IngestService& service_;
  httplib::Server server_;
};

// Thin blocking client. Non-2xx responses are rethrown as the matching
// error type.
class IngestClient {
 public:
  explicit IngestClient(const std::string& base_url) : client_(base_url) {
    client_.set_connection_timeout(5);
    client_.set_read_timeout(60);
  }

  Registration register_participant(int tz_offset_minutes) {
    const auto j = call("POST", "/v1/participants", {}, nlohmann::json{{"tz_offset_minutes", tz_offset_minutes}});
    Registration r;
    r.record.id = ParticipantId(j.at("id").get<std::string>());
    r.record.tz_offset_minutes = tz_offset_minutes;
    r.token = j.at("token").get<std::string>();
    return r;
  }

  BatchResult post_events(const std::string& token, std::span<const SensorEvent> events) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : events) arr.push_back(wire::to_json(e));
    const auto j = call("POST", "/v1/events", token, nlohmann::json{{"events", arr}});
    BatchResult r;
    r.accepted = j.at("accepted").get<std::size_t>();
    for (const auto& e : j.at("errors")) r.errors.push_back({e.at("index").get<std::size_t>(), e.at("message").get<std::string>()});
    return r;
  }

  EmaResult post_ema(const std::string& token, std::int64_t at_ms, std::span<const int> items) {
    const auto j = call("POST", "/v1/ema", token, nlohmann::json{{"at", at_ms}, {"items", std::vector<int>(items.begin(), items.end())}});
    const auto level = parse_distress_level(j.at("level").get<std::string>());
    if (!level) throw Error("server returned an unknown level");
    return {j.at("score").get<int>(), *level};
  }

  nlohmann::json get_events(const std::string& token, const std::string& query) {
    return call("GET", "/v1/events?" + query, token, {});
  }

  // Raw response body, so callers can compare bytes.
  std::string get_dataset(const std::string& token, std::span<const ParticipantId> cohort) {
    std::string ids;
    for (const auto& id : cohort) ids += (ids.empty() ? "" : ",") + id.str();
    return raw("GET", "/v1/dataset?participants=" + ids, token, {});
  }

  bool healthy() {
    auto res = client_.Get("/v1/healthz");
    return res && res->status == 200;
  }

 private:
  std::string raw(const std::string& method, const std::string& path, const std::string& token,
                  const nlohmann::json& body) {
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    auto res = method == "GET" ? client_.Get(path, headers)
                               : client_.Post(path, headers, body.dump(), "application/json");
    if (!res) throw Error("request " + method + " " + path + " failed: " + httplib::to_string(res.error()));
    if (res->status >= 300) {
      std::string msg = res->body;
      auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (!j.is_discarded() && j.contains("error")) msg = j["error"].value("message", res->body);
      switch (res->status) {
        case 400: throw ValidationError(j.is_discarded() ? "" : j["error"].value("field", ""), msg);
        case 401: throw AuthError(msg);
        case 403: throw ForbiddenError(msg);
        case 404: throw NotFoundError(msg);
        default: throw Error("HTTP " + std::to_string(res->status) + ": " + msg);
      }
    }
    return res->body;
  }

  nlohmann::json call(const std::string& method, const std::string& path, const std::string& token,
                      const nlohmann::json& body) {
    return nlohmann::json::parse(raw(method, path, token, body));
  }

  httplib::Client client_;
};

}  // namespace ewellness
