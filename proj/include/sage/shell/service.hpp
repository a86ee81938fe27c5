#pragma once

#include <string>

#include "sage/steer/session.hpp"

namespace httplib {
class Server;
}

namespace sage::shell {

struct ServiceOptions {
  /// When non-empty every route except /health requires "Authorization: Bearer <token>".
  std::string bearer_token;
};

/// Chat and steering API over `store`:
///   GET  /health
///   POST /sessions                       -> 201 {session_id, session}
///   GET  /sessions/{id}
///   POST /sessions/{id}/message          {text, steering?} -> turn
///   PUT  /sessions/{id}/steering         spec -> {steering}
/// Errors are {"error": {"code", "message"}} with 400/401/404/409/422/502.
void install_routes(httplib::Server& srv, steer::SessionStore& store, const ServiceOptions& opts = {});

}  // namespace sage::shell
