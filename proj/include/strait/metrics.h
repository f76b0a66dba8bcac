#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "strait/profile.h"
#include "strait/trace.h"
#include "strait/types.h"

namespace strait {

struct ClassMetrics {
  std::int64_t arrivals = 0;
  std::int64_t completed = 0;
  std::int64_t late = 0;     // completed after the deadline
  std::int64_t dropped = 0;  // early-dropped, counted as violations
  double violation_pct = 0;
  // Nearest-rank percentiles over completed requests; 0 when none completed.
  Millis p50 = 0;
  Millis p95 = 0;
  Millis p99 = 0;
  // Requests meeting their deadline per window, in requests per second,
  // bucketed by completion time.
  std::vector<double> goodput;
};

struct CLowPoint {
  Timestamp time = 0;
  GpuId gpu = 0;
  double c_low = 0;
};

struct MetricsReport {
  std::array<ClassMetrics, kNumPriorities> classes;
  Millis window = 1000.0;
  // Signed relative errors, one entry per completed batch.
  std::vector<double> intf_error;     // prediction made at schedule time
  std::vector<double> model_error;    // current parameters on observed co-location
  std::vector<double> frozen_error;   // frozen copy, where one was tracked
  std::vector<double> latency_error;  // estimated vs actual batch latency
  // |measured - isolated| / isolated per batch.
  std::vector<double> kernel_overhead;
  std::vector<CLowPoint> c_low;
  bool partial = false;

  const ClassMetrics& For(Priority p) const { return classes[Index(p)]; }
};

MetricsReport ComputeMetrics(const EventTrace& trace, Millis window = 1000.0);

// Nearest-rank percentile, pct in (0, 100]. Throws on an empty input.
double NearestRank(std::vector<double> values, double pct);
// Nearest-rank percentile of |x|.
double AbsPercentile(const std::vector<double>& values, double pct);

// Multiplies every throughput value by 1 + u, u ~ Uniform(-m, m) with m the
// magnitude as a fraction, and clamps into [0, 1]. Latencies are untouched.
ProfileSet PerturbProfiles(const ProfileSet& profiles, double magnitude_percent,
                           std::uint64_t seed);

std::string SummaryJson(const MetricsReport& report);
std::string GoodputCsv(const MetricsReport& report);
std::string ErrorsCsv(const MetricsReport& report);
std::string CLowCsv(const MetricsReport& report);

// summary.json, goodput.csv, errors.csv and clow.csv under `dir`.
void WriteReport(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace strait
