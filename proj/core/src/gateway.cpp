#include "promptwall/gateway.hpp"

#include <nlohmann/json.hpp>

#include <httplib.h>

#include "promptwall/config.hpp"

namespace promptwall {

namespace {

using nlohmann::json;

std::string error_body(const std::string& message) {
  json doc;
  doc["error"] = message;
  return doc.dump(2);
}

}  // namespace

struct Gateway::Impl {
  httplib::Server server;
};

Gateway::Gateway(DefenseStack stack) : stack_(std::move(stack)), impl_(new Impl) {
  impl_->server.Post("/screen", [this](const httplib::Request& request,
                                       httplib::Response& response) {
    const auto [status, body] = handle_screen(request.body);
    response.status = status;
    response.set_content(body, "application/json");
  });
  impl_->server.Post("/simulate", [this](const httplib::Request& request,
                                         httplib::Response& response) {
    const auto [status, body] = handle_simulate(request.body);
    response.status = status;
    response.set_content(body, "application/json");
  });
}

Gateway::~Gateway() { stop(); }

std::pair<int, std::string> Gateway::handle_screen(const std::string& body) const {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    return {400, error_body(std::string("request body is not valid JSON: ") + e.what())};
  }
  if (!doc.is_object() || !doc.contains("text") || !doc.at("text").is_string()) {
    return {400, error_body("missing string field 'text'")};
  }
  if (!doc.contains("channel") || !doc.at("channel").is_string()) {
    return {400, error_body("missing string field 'channel'")};
  }
  const auto channel = trust_tag_from_string(doc.at("channel").get<std::string>());
  if (!channel) {
    return {400, error_body("unknown channel '" + doc.at("channel").get<std::string>() +
                            "' (expected system|user|external|tool|ai)")};
  }
  try {
    const ScreenResult result = screen(doc.at("text").get<std::string>(), *channel, stack_);
    return {200, screen_response_json(result)};
  } catch (const PolicyError& e) {
    return {500, error_body(std::string("configuration fault: ") + e.what())};
  } catch (const std::exception& e) {
    return {400, error_body(e.what())};
  }
}

std::pair<int, std::string> Gateway::handle_simulate(const std::string& body) const {
  try {
    const SimConfig config = sim_config_from_json_text(body);
    const SimMetrics metrics = run(config);
    return {200, sim_metrics_json(metrics)};
  } catch (const std::exception& e) {
    return {400, error_body(e.what())};
  }
}

int Gateway::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool Gateway::listen_after_bind() { return impl_->server.listen_after_bind(); }

bool Gateway::serve(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

void Gateway::stop() {
  if (impl_ && impl_->server.is_running()) {
    impl_->server.stop();
  }
}

bool gateway_serve(const std::string& bind, const DefenseStack& stack) {
  std::string host = bind;
  int port = 8080;
  const std::size_t colon = bind.rfind(':');
  if (colon != std::string::npos) {
    host = bind.substr(0, colon);
    port = std::stoi(bind.substr(colon + 1));
  }
  if (host.empty()) {
    host = "127.0.0.1";
  }
  Gateway gateway(stack);
  return gateway.serve(host, port);
}

}  // namespace promptwall
