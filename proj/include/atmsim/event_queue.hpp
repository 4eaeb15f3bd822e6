#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <vector>

namespace atmsim {

enum class EventKind : std::uint8_t {
  CellArrival,
  CellTransmitComplete,
  GeneratorFire,
  FeedbackEpoch,
  ControlMessage,
  TimerExpiry,
};

const char* to_string(EventKind kind);

struct Event {
  double time = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::TimerExpiry;
  std::function<void()> action;
};

/// Pending events ordered by (time, sequence). The sequence number is the
/// insertion order, so simultaneous events run in the order they were
/// scheduled.
class EventQueue {
 public:
  /// Throws OrderingError when `time` is before the last dispatched event.
  std::uint64_t schedule(double time, EventKind kind, std::function<void()> action);

  /// Removes and returns the earliest event, advancing now().
  std::optional<Event> next_event();

  double now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::optional<double> peek_time() const;
  std::uint64_t dispatched() const { return dispatched_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.sequence > b.sequence;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_sequence_ = 0;
  std::uint64_t dispatched_ = 0;
  double now_ = 0.0;
  std::optional<std::pair<double, std::uint64_t>> last_;
};

}  // namespace atmsim
