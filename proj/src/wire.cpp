#include "magscan/wire.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace magscan::wire {

namespace {

using json = nlohmann::json;

constexpr std::array<std::pair<MessageType, std::string_view>, 7> kNames{{
    {MessageType::pose, "pose"},
    {MessageType::spot, "spot"},
    {MessageType::shape, "shape"},
    {MessageType::mode, "mode"},
    {MessageType::session_start, "session_start"},
    {MessageType::session_end, "session_end"},
    {MessageType::error, "error"},
}};

[[noreturn]] void bad(const std::string& what, std::optional<std::uint64_t> reply_to = std::nullopt) {
  throw ProtocolError(what, reply_to);
}

double finite_number(const json& j, const char* key, std::optional<std::uint64_t> seq) {
  const auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing field '") + key + "'", seq);
  if (!it->is_number()) bad(std::string("field '") + key + "' must be a number", seq);
  const double v = it->get<double>();
  if (!std::isfinite(v)) bad(std::string("field '") + key + "' is not finite", seq);
  return v;
}

// Shared header checks; returns the parsed object.
Frame parse_header(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    bad("malformed JSON");
  }
  if (!j.is_object()) bad("frame must be a JSON object");

  std::optional<std::uint64_t> seq;
  if (const auto it = j.find("seq"); it != j.end() && it->is_number_unsigned()) seq = it->get<std::uint64_t>();

  const auto v = j.find("v");
  if (v == j.end()) bad("missing field 'v'", seq);
  if (!v->is_number_integer() || v->get<std::int64_t>() != kVersion)
    bad("unsupported schema version " + v->dump(), seq);

  const auto t = j.find("type");
  if (t == j.end() || !t->is_string()) bad("missing field 'type'", seq);
  const auto type = type_from_name(t->get<std::string>());
  if (!type) bad("unknown message type '" + t->get<std::string>() + "'", seq);

  if (!seq) bad("field 'seq' must be an unsigned integer", std::nullopt);
  const double t_ms = finite_number(j, "t_ms", seq);
  return {*type, *seq, t_ms, std::move(j)};
}

}  // namespace

std::string_view type_name(MessageType t) {
  for (const auto& [k, n] : kNames)
    if (k == t) return n;
  return "error";
}

std::optional<MessageType> type_from_name(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

Frame parse_frame(std::string_view text) { return parse_header(text); }

Inbound parse_inbound(std::string_view text) {
  auto f = parse_header(text);
  switch (f.type) {
    case MessageType::pose: {
      const double x = finite_number(f.json, "x", f.seq);
      const double y = finite_number(f.json, "y", f.seq);
      return PoseMsg{f.seq, f.t_ms, std::clamp(x, -1.0, 1.0), std::clamp(y, -1.0, 1.0)};
    }
    case MessageType::session_start: {
      SessionStartMsg m{f.seq, f.t_ms, std::nullopt};
      if (const auto it = f.json.find("shape"); it != f.json.end()) {
        if (!it->is_string()) bad("field 'shape' must be a string", f.seq);
        m.shape = it->get<std::string>();
      }
      return m;
    }
    case MessageType::session_end:
      return SessionEndMsg{f.seq, f.t_ms};
    default:
      bad("type '" + std::string(type_name(f.type)) + "' is server-to-client only", f.seq);
  }
}

std::uint64_t seq_of(const Inbound& m) {
  return std::visit([](const auto& v) { return v.seq; }, m);
}

void SeqTracker::accept(std::uint64_t seq) {
  if (seq <= last_)
    bad("seq " + std::to_string(seq) + " does not follow " + std::to_string(last_), seq);
  last_ = seq;
}

Outbound spot(double t_ms, Point2 mm) {
  return {MessageType::spot, t_ms, {{"x_mm", mm.x}, {"y_mm", mm.y}}};
}

Outbound shape(double t_ms, const TargetShape& s) {
  auto pts = nlohmann::ordered_json::array();
  for (const auto& p : s.polyline_mm) pts.push_back({p.x, p.y});
  return {MessageType::shape, t_ms, {{"id", s.id}, {"points_mm", pts}, {"band_mm", s.band_halfwidth_mm}}};
}

Outbound mode(double t_ms, std::string_view mode_name) {
  return {MessageType::mode, t_ms, {{"mode", std::string(mode_name)}}};
}

Outbound session_start(double t_ms, const std::string& session, const std::string& shape_id) {
  return {MessageType::session_start, t_ms, {{"session", session}, {"shape", shape_id}}};
}

Outbound session_end(double t_ms, const std::string& session, bool partial, const std::string& reason,
                     const nlohmann::json& report) {
  return {MessageType::session_end,
          t_ms,
          {{"session", session}, {"partial", partial}, {"reason", reason},
           {"report", nlohmann::ordered_json::parse(report.dump())}}};
}

Outbound error(double t_ms, ErrorCategory category, const std::string& message,
               std::optional<std::uint64_t> reply_to) {
  Outbound m{MessageType::error, t_ms, {{"category", std::string(category_name(category))}, {"message", message}}};
  if (reply_to) m.body["reply_to"] = *reply_to;
  return m;
}

std::string serialize(const Outbound& m, std::uint64_t seq) {
  nlohmann::ordered_json j;
  j["v"] = kVersion;
  j["type"] = std::string(type_name(m.type));
  j["seq"] = seq;
  j["t_ms"] = m.t_ms;
  for (const auto& [k, v] : m.body.items()) j[k] = v;
  return j.dump();
}

OutboundQueue::OutboundQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) fail(ErrorCategory::config, "outbound queue capacity must be > 0");
}

void OutboundQueue::push(Outbound m) {
  std::lock_guard lock(mutex_);
  if (m.droppable()) {
    if (spots_ == capacity_) {
      const auto it = std::find_if(items_.begin(), items_.end(), [](const Outbound& o) { return o.droppable(); });
      items_.erase(it);
      --spots_;
      ++dropped_;
    }
    ++spots_;
  }
  items_.push_back(std::move(m));
}

std::optional<Outbound> OutboundQueue::pop() {
  std::lock_guard lock(mutex_);
  if (items_.empty()) return std::nullopt;
  auto m = std::move(items_.front());
  items_.pop_front();
  if (m.droppable()) --spots_;
  return m;
}

std::size_t OutboundQueue::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

std::size_t OutboundQueue::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

}  // namespace magscan::wire
