#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace strait {

// All times are milliseconds on the simulation clock.
using Millis = double;
using Timestamp = double;

// Per-metric resource throughput, each entry a fraction of peak activity.
using Metrics = std::vector<double>;

using RequestId = std::int64_t;
using BatchId = std::int64_t;
using GpuId = int;

enum class Priority : std::uint8_t { kHigh = 0, kLow = 1 };

inline constexpr std::size_t kNumPriorities = 2;

inline std::size_t Index(Priority p) { return static_cast<std::size_t>(p); }

// High orders before Low.
inline bool HigherFirst(Priority a, Priority b) { return Index(a) < Index(b); }

// True when `a` is at least as urgent as `b`.
inline bool AtLeast(Priority a, Priority b) { return Index(a) <= Index(b); }

std::string_view ToString(Priority p);
Priority ParsePriority(std::string_view s);

// Default co-location metric names: memory hierarchy then compute pipes.
const std::vector<std::string>& DefaultMetricNames();
inline constexpr std::size_t kDefaultMetricCount = 5;

// Thrown for broken simulation invariants (time regressions, unknown batches).
class SimulationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Request {
  RequestId request_id = 0;
  std::string model_id;
  Timestamp arrival_time = 0;
  Timestamp deadline_abs = 0;
};

struct Batch {
  BatchId batch_id = 0;
  std::string model_id;
  int size = 0;
  Priority priority = Priority::kHigh;
  Timestamp front_enqueue_time = 0;
  std::vector<Request> requests;
  GpuId gpu_id = -1;
  Timestamp sched_time = 0;
  Timestamp transfer_start = 0;
  Timestamp kernel_start = 0;
  Timestamp completion_time = 0;

  // Deadline of the front (oldest) request; binds the whole batch.
  Timestamp BindingDeadline() const { return requests.front().deadline_abs; }
};

// Element-wise helpers for metric vectors.
void AddInPlace(Metrics& acc, const Metrics& v);
void SubInPlace(Metrics& acc, const Metrics& v);
Metrics Scaled(const Metrics& v, double factor);

}  // namespace strait
