#pragma once

// HTTP + WebSocket monitor service. Requests and stream events are JSON
// documents built from sniff/document.hpp; see docs/api.md.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "sniff/analysis.hpp"
#include "sniff/interfaces.hpp"

namespace sniff {

struct ServiceOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks an ephemeral port
  /// Non-loopback addresses are refused unless this is set and a token is
  /// configured.
  bool allow_external = false;
  /// Shared bearer token; unset means unauthenticated loopback-only mode.
  std::optional<std::string> token;
  InterfaceEnumerator enumerate = fixture_or_system_interfaces;
  DetectorConfig detectors;
  std::size_t event_log_capacity = 50000;
  std::size_t default_ring_capacity = 100000;
  std::size_t io_threads = 4;
  std::function<Timestamp()> clock;  // report generated_at; defaults to the system clock
};

class ServiceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class MonitorService {
 public:
  explicit MonitorService(ServiceOptions opts);
  ~MonitorService();

  MonitorService(const MonitorService&) = delete;
  MonitorService& operator=(const MonitorService&) = delete;

  /// Binds and starts the I/O threads. Throws ServiceError.
  void start();
  /// Closes the listener and every connection, stops all sessions.
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  std::uint16_t port() const;
  const std::string& address() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// True for 127.0.0.0/8, ::1 and "localhost".
bool is_loopback_address(const std::string& address);

}  // namespace sniff
