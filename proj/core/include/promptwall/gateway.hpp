#pragma once

#include <memory>
#include <string>
#include <utility>

#include "promptwall/harness.hpp"

namespace promptwall {

// Stateless HTTP screening gateway: POST /screen and POST /simulate.
class Gateway {
 public:
  explicit Gateway(DefenseStack stack);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Request handlers, exposed directly so tests and the HTTP layer share one
  // code path. Returns (status, JSON body).
  std::pair<int, std::string> handle_screen(const std::string& body) const;
  std::pair<int, std::string> handle_simulate(const std::string& body) const;

  // Binds to an OS-assigned port; returns it (or -1 on failure).
  int bind_any_port(const std::string& host);
  // Serves until stop(); use after bind_any_port.
  bool listen_after_bind();
  // Bind + serve on a fixed port (blocking).
  bool serve(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  DefenseStack stack_;
  std::unique_ptr<Impl> impl_;
};

// Blocking convenience for the CLI; `bind` is "host:port".
bool gateway_serve(const std::string& bind, const DefenseStack& stack);

}  // namespace promptwall
