#pragma once

// WebSocket teleop endpoint (schema in wire.hpp). One interactive client at a
// time. Network I/O runs on one thread, the session (control tick owner) on
// another; they talk through a mutex inbox and a bounded per-connection
// outbound queue, so a slow client never stalls the control loop.

#include "magscan/harness.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace magscan {

struct ServiceConfig {
  HarnessConfig harness;
  std::string shape_id = "T1";
  std::filesystem::path session_root = "sessions";
  std::string bind_address = "127.0.0.1";
  unsigned short port = 0;  // 0 picks a free port
  // Session seconds per wall second; >1 runs the simulation faster than
  // real time (tests).
  double time_scale = 1.0;
  std::size_t telemetry_queue = 64;
  bool write_frames = false;

  void validate() const;
};

struct ServiceStats {
  std::uint64_t accepted = 0;
  std::uint64_t rejected_busy = 0;
  std::uint64_t protocol_errors = 0;
  std::uint64_t telemetry_dropped = 0;
  std::uint64_t sessions_written = 0;
  std::uint64_t write_failures = 0;
};

class TeleopServer {
 public:
  explicit TeleopServer(ServiceConfig cfg);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts both threads; returns the bound port.
  unsigned short start();
  /// Ends any running session as partial ("shutdown"), then joins.
  void stop();

  ServiceStats stats() const;
  /// Session directories written so far, in order.
  std::vector<std::filesystem::path> sessions() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace magscan
