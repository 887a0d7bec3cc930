#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace vgbench {

using TimePoint = std::chrono::sys_time<std::chrono::milliseconds>;

/// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string format_timestamp(TimePoint t);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() = 0;
};

class SystemClock : public Clock {
 public:
  TimePoint now() override;
};

/// Deterministic clock for replay runs: starts at `start` and advances by
/// `step` on every reading.
class LogicalClock : public Clock {
 public:
  explicit LogicalClock(TimePoint start = TimePoint{std::chrono::milliseconds{946'684'800'000}},
                        std::chrono::milliseconds step = std::chrono::seconds{1});
  TimePoint now() override;

 private:
  TimePoint next_;
  std::chrono::milliseconds step_;
};

/// Manually driven clock for lease tests.
class ManualClock : public Clock {
 public:
  explicit ManualClock(TimePoint start) : now_(start) {}
  TimePoint now() override { return now_; }
  void advance(std::chrono::milliseconds d) { now_ += d; }

 private:
  TimePoint now_;
};

}  // namespace vgbench
