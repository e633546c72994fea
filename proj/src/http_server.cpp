// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/http.hpp"

namespace splitaudit::service {

void bind_routes(httplib::Server& server, Service& service) {
  auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, req.body, req.get_header_value("X-Session-Token")};
    auto out = service.handle(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server.Get(".*", route);
  server.Post(".*", route);
  server.Put(".*", route);
  server.Delete(".*", route);
}

void serve_http(Service& service, const std::string& host, int port) {
  httplib::Server server;
  bind_routes(server, service);
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace splitaudit::service
