#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "strait/types.h"

namespace strait {

enum class TraceKind : std::uint8_t {
  kArrival,
  kDrop,
  kSchedule,
  kTransferStart,
  kTransferEnd,
  kKernelStart,
  kKernelEnd,
  kFeedback,
  kComplete,
  kCLow,
};

std::string_view ToString(TraceKind kind);
TraceKind ParseTraceKind(std::string_view s);

// One line of the event trace. The meaning of the value columns depends on
// the kind:
//   arrival         v0 deadline_abs
//   schedule        v0 estimated latency, v1 predicted intf
//   transfer_start  v0 transfer end
//   kernel_end      v0 measured kernel, v1 isolated kernel,
//                   v2 integral of 1/slowdown over the kernel, v3 actual intf
//   feedback        v0 intf predicted at schedule, v1 intf under current
//                   parameters, v2 actual intf, v3 frozen-copy intf (nan if
//                   none), v4 estimated latency, v5 actual batch latency
//   complete        v0 request latency, v1 deadline_abs
//   clow            v0 c_low percent
struct TraceEvent {
  Timestamp time = 0;
  TraceKind kind = TraceKind::kArrival;
  GpuId gpu = -1;
  BatchId batch = -1;
  RequestId request = -1;
  std::string model;
  Priority priority = Priority::kHigh;
  int size = 0;
  std::array<double, 6> v = {0, 0, 0, 0, 0, 0};
};

struct EventTrace {
  std::vector<TraceEvent> events;
  bool truncated = false;  // the run stopped before draining

  std::string ToCsv() const;
  static EventTrace FromCsv(const std::string& text);
  void Save(const std::filesystem::path& path) const;
  static EventTrace Load(const std::filesystem::path& path);

  // FNV-1a over the CSV form.
  std::uint64_t Hash() const;
};

std::string_view TraceCsvHeader();

}  // namespace strait
