#pragma once

// Teleop wire schema v1: JSON text frames exchanged with the tablet UI.
//
// Every frame carries "v":1, "type", "seq" (strictly increasing per direction
// and connection, starting at 1) and "t_ms".
//   client → server: pose {x, y in [-1, 1]}, session_start {shape?}, session_end
//   server → client: spot {x_mm, y_mm}, shape {id, points_mm, band_mm},
//                    mode {mode}, session_start {session, shape},
//                    session_end {session, partial, reason, report},
//                    error {category, message, reply_to?}
// Unknown types, a missing or different "v", non-increasing seq and
// out-of-direction types are protocol errors.

#include "magscan/errors.hpp"
#include "magscan/shapes.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace magscan::wire {

inline constexpr int kVersion = 1;

enum class MessageType { pose, spot, shape, mode, session_start, session_end, error };

std::string_view type_name(MessageType t);
std::optional<MessageType> type_from_name(std::string_view name);

struct PoseMsg {
  std::uint64_t seq = 0;
  double t_ms = 0.0;
  double x = 0.0;  // clamped to [-1, 1]
  double y = 0.0;
};

struct SessionStartMsg {
  std::uint64_t seq = 0;
  double t_ms = 0.0;
  std::optional<std::string> shape;
};

struct SessionEndMsg {
  std::uint64_t seq = 0;
  double t_ms = 0.0;
};

using Inbound = std::variant<PoseMsg, SessionStartMsg, SessionEndMsg>;

/// Parses a client frame. Throws a protocol error (with reply_to set when the
/// frame had a readable seq).
Inbound parse_inbound(std::string_view text);
std::uint64_t seq_of(const Inbound& m);

class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::optional<std::uint64_t> reply_to)
      : Error(ErrorCategory::protocol, what), reply_to_(reply_to) {}
  std::optional<std::uint64_t> reply_to() const { return reply_to_; }

 private:
  std::optional<std::uint64_t> reply_to_;
};

/// Strictly increasing sequence numbers for one direction.
class SeqTracker {
 public:
  /// Throws ProtocolError if seq does not exceed the last accepted one.
  void accept(std::uint64_t seq);
  std::uint64_t last() const { return last_; }

 private:
  std::uint64_t last_ = 0;
};

/// A server frame before sequencing. Only spot frames may be dropped.
struct Outbound {
  MessageType type = MessageType::error;
  double t_ms = 0.0;
  nlohmann::ordered_json body = nlohmann::ordered_json::object();

  bool droppable() const { return type == MessageType::spot; }
};

Outbound spot(double t_ms, Point2 mm);
Outbound shape(double t_ms, const TargetShape& s);
Outbound mode(double t_ms, std::string_view mode_name);
Outbound session_start(double t_ms, const std::string& session, const std::string& shape_id);
Outbound session_end(double t_ms, const std::string& session, bool partial, const std::string& reason,
                     const nlohmann::json& report);
Outbound error(double t_ms, ErrorCategory category, const std::string& message,
               std::optional<std::uint64_t> reply_to = std::nullopt);

/// {"v":1,"type":..,"seq":..,"t_ms":.., body...}
std::string serialize(const Outbound& m, std::uint64_t seq);

/// Any v1 frame, either direction: checks v, type, seq and t_ms.
struct Frame {
  MessageType type;
  std::uint64_t seq;
  double t_ms;
  nlohmann::json json;
};
Frame parse_frame(std::string_view text);

/// Outbound buffer between the control owner and a slow client. Spot frames
/// beyond `capacity` push out the oldest queued spot; other frames always
/// queue (they are rare and must not be lost).
class OutboundQueue {
 public:
  explicit OutboundQueue(std::size_t capacity);
  void push(Outbound m);
  std::optional<Outbound> pop();
  std::size_t size() const;
  std::size_t dropped() const;

 private:
  mutable std::mutex mutex_;
  std::deque<Outbound> items_;
  std::size_t capacity_;
  std::size_t spots_ = 0;
  std::size_t dropped_ = 0;
};

}  // namespace magscan::wire
