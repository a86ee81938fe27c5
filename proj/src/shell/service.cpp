#include "sage/shell/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "sage/sac/grammar.hpp"

namespace sage::shell {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message,
                json extra = json::object()) {
  extra["code"] = code;
  extra["message"] = message;
  send_json(res, status, {{"error", std::move(extra)}});
}

json parse_body(const httplib::Request& req, bool allow_empty) {
  if (req.body.empty() && allow_empty) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::invalid_argument("body must be a JSON object");
  return j;
}

json turn_json(const steer::SessionTurn& t, std::size_t index) {
  auto j = sac::to_json(t.agent);
  j["turn_index"] = index;
  j["sac"] = sac::render_system_message(t.agent);
  j["steering"] = steer::to_json(t.steering);
  j["forced_fields"] = t.forced_fields;
  return j;
}

/// Maps the exceptions shared by all session routes onto status codes.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const steer::SessionNotFound& e) {
    send_error(res, 404, "session_not_found", e.what());
  } catch (const steer::SessionBusy& e) {
    send_error(res, 409, "generation_in_flight", e.what());
  } catch (const steer::InvalidSteering& e) {
    send_error(res, 422, "invalid_steering", e.what());
  } catch (const steer::GenerationError& e) {
    send_error(res, 502, "generation_failed", e.what(), {{"raw", e.raw()}});
  } catch (const llm::GatewayError& e) {
    send_error(res, 502, "backend_error", e.what(), {{"kind", llm::to_string(e.kind())}});
  } catch (const std::invalid_argument& e) {
    send_error(res, 400, "bad_request", e.what());
  } catch (const std::exception& e) {
    spdlog::error("unhandled: {}", e.what());
    send_error(res, 500, "internal", e.what());
  }
}

}  // namespace

void install_routes(httplib::Server& srv, steer::SessionStore& store, const ServiceOptions& opts) {
  srv.set_pre_routing_handler([opts](const httplib::Request& req, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
    if (req.method == "OPTIONS") {
      res.status = 204;
      return httplib::Server::HandlerResponse::Handled;
    }
    if (!opts.bearer_token.empty() && req.path != "/health" &&
        req.get_header_value("Authorization") != "Bearer " + opts.bearer_token) {
      send_error(res, 401, "unauthorized", "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  srv.Get("/health", [&store](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"sessions", store.size()}});
  });

  srv.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req, true);
      if (body.contains("steering") && !body.at("steering").is_null()) steer::steering_from_json(body.at("steering"));
      const auto id = store.create(body);
      send_json(res, 201, {{"session_id", id}, {"session", steer::to_json(store.snapshot(id))}});
    });
  });

  srv.Get(R"(/sessions/([^/]+))", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, steer::to_json(store.snapshot(req.matches[1]))); });
  });

  srv.Post(R"(/sessions/([^/]+)/message)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const auto body = parse_body(req, false);
      if (!body.contains("text") || !body.at("text").is_string())
        throw std::invalid_argument("'text' must be a string");
      std::optional<steer::SteeringSpec> steering;
      if (body.contains("steering") && !body.at("steering").is_null())
        steering = steer::steering_from_json(body.at("steering"));
      const auto turn = store.message(id, body.at("text").get<std::string>(), steering);
      send_json(res, 200, turn_json(turn, store.snapshot(id).turns.size() - 1));
    });
  });

  srv.Put(R"(/sessions/([^/]+)/steering)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      store.snapshot(id);  // 404 before validating the body
      const auto spec = steer::steering_from_json(parse_body(req, false));
      store.set_steering(id, spec);
      send_json(res, 200, {{"session_id", id}, {"steering", steer::to_json(spec)}});
    });
  });
}

}  // namespace sage::shell
