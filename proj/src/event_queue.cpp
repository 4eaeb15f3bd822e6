#include "atmsim/event_queue.hpp"

#include <string>

#include "atmsim/errors.hpp"

namespace atmsim {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::CellArrival: return "CellArrival";
    case EventKind::CellTransmitComplete: return "CellTransmitComplete";
    case EventKind::GeneratorFire: return "GeneratorFire";
    case EventKind::FeedbackEpoch: return "FeedbackEpoch";
    case EventKind::ControlMessage: return "ControlMessage";
    case EventKind::TimerExpiry: return "TimerExpiry";
  }
  return "?";
}

std::uint64_t EventQueue::schedule(double time, EventKind kind, std::function<void()> action) {
  if (!(time >= now_))
    throw OrderingError("event scheduled at " + std::to_string(time) + " before now " +
                        std::to_string(now_));
  const auto seq = next_sequence_++;
  heap_.push(Event{time, seq, kind, std::move(action)});
  return seq;
}

std::optional<Event> EventQueue::next_event() {
  if (heap_.empty()) return std::nullopt;
  // time and sequence survive the move, so the heap stays ordered for pop()
  Event ev = std::move(const_cast<Event&>(heap_.top()));
  heap_.pop();
  if (last_ && (ev.time < last_->first ||
                (ev.time == last_->first && ev.sequence < last_->second)))
    throw OrderingError("event queue dispatched out of (time, sequence) order");
  last_ = {ev.time, ev.sequence};
  now_ = ev.time;
  ++dispatched_;
  return ev;
}

std::optional<double> EventQueue::peek_time() const {
  if (heap_.empty()) return std::nullopt;
  return heap_.top().time;
}

}  // namespace atmsim
