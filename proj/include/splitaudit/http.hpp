// SPDX-License-Identifier: Apache-2.0
//
// cpp-httplib binding for the service router. Requests carry the session in
// the X-Session-Token header.

#pragma once

#include <string>

#include <httplib.h>

#include "splitaudit/service.hpp"

namespace splitaudit::service {

/// Registers the API routes of `service` on `server`.
void bind_routes(httplib::Server& server, Service& service);

/// Runs an HTTP/1.1 server until the process is stopped.
void serve_http(Service& service, const std::string& host, int port);

}  // namespace splitaudit::service
