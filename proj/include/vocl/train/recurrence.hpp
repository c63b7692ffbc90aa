#pragma once

#include <deque>
#include <string>
#include <utility>

#include "vocl/ad/var.hpp"
#include "vocl/core/error.hpp"
#include "vocl/core/rng.hpp"

namespace vocl::train {

/// Bounded history of the most recent slots and feature tokens, indexed by 1-based frame.
/// Holds at most `capacity` slot entries and `capacity` feature entries (the feature
/// window runs one frame ahead of the slot window).
class RecurrenceTrace {
 public:
  explicit RecurrenceTrace(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw PreconditionError("trace capacity must be >= 1");
  }

  void push_slots(int frame, Var slots) { push(slots_, frame, std::move(slots)); }
  void push_feature(int frame, Var tokens) { push(features_, frame, std::move(tokens)); }

  const Var& slots(int frame) const { return lookup(slots_, frame, "slots"); }
  const Var& feature(int frame) const { return lookup(features_, frame, "feature"); }

  bool has_slots(int frame) const { return contains(slots_, frame); }
  bool has_feature(int frame) const { return contains(features_, frame); }

  int capacity() const { return capacity_; }
  int slot_count() const { return static_cast<int>(slots_.size()); }
  int feature_count() const { return static_cast<int>(features_.size()); }
  int oldest_slots() const { return slots_.empty() ? 0 : slots_.front().first; }
  int oldest_feature() const { return features_.empty() ? 0 : features_.front().first; }

 private:
  using Buffer = std::deque<std::pair<int, Var>>;

  void push(Buffer& b, int frame, Var v) {
    if (!b.empty() && frame != b.back().first + 1)
      throw PreconditionError("trace entries must be pushed in frame order");
    b.emplace_back(frame, std::move(v));
    while (static_cast<int>(b.size()) > capacity_) b.pop_front();
  }
  static bool contains(const Buffer& b, int frame) {
    return !b.empty() && frame >= b.front().first && frame <= b.back().first;
  }
  static const Var& lookup(const Buffer& b, int frame, const char* what) {
    if (!contains(b, frame))
      throw PreconditionError(std::string("trace has no ") + what + " for frame " + std::to_string(frame) +
                              (b.empty() ? std::string(" (empty)")
                                         : " (holds " + std::to_string(b.front().first) + ".." +
                                               std::to_string(b.back().first) + ")"));
    return b[frame - b.front().first].second;
  }

  int capacity_;
  Buffer slots_;
  Buffer features_;
};

/// Slot/feature source frames for predicting the query of frame t+1.
struct PairSample {
  int t1 = 0;
  int t2 = 0;
  int target = 0;  // t + 1
  int slot_offset() const { return target - t1; }
  int feature_offset() const { return target - t2; }
};

/// Draws t1 ~ U{max(1, t-window+1) .. t} and t2 ~ U{max(1, t-window+2) .. t+1} independently.
inline PairSample sample_pair(int t, int window, const RecurrenceTrace& trace, Rng& rng) {
  if (t < 1 || window < 1) throw PreconditionError("sample_pair needs t >= 1 and window >= 1");
  const int t1 = uniform_int(rng, std::max(1, t - window + 1), t);
  const int t2 = uniform_int(rng, std::max(1, t - window + 2), t + 1);
  if (!trace.has_slots(t1) || !trace.has_feature(t2))
    throw PreconditionError("sampled frames (" + std::to_string(t1) + ", " + std::to_string(t2) +
                            ") were evicted from the trace; capacity " + std::to_string(trace.capacity()) +
                            " is too small for window " + std::to_string(window));
  return {t1, t2, t + 1};
}

}  // namespace vocl::train
