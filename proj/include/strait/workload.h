#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "strait/types.h"

namespace strait {

// Open-loop arrival streams. Rates are requests per second; timestamps and
// durations are milliseconds.

std::vector<Timestamp> GenPoisson(double rate_per_s, Millis duration,
                                  std::uint64_t seed);

// Evenly spaced arrivals at k / rate for k = 0, 1, ... strictly below duration.
std::vector<Timestamp> GenUniform(double rate_per_s, Millis duration);

// Per-minute request counts per function, as in public serverless traces.
struct InvocationTrace {
  std::map<std::string, std::map<std::int64_t, std::int64_t>> counts;

  std::vector<std::string> FunctionIds() const;
};

// CSV with header `function_id,minute_index,count`.
InvocationTrace ParseInvocationTrace(const std::string& csv_text);
InvocationTrace LoadInvocationTrace(const std::filesystem::path& path);

// Rate for a minute: count * scale / 60 requests per second.
double MinuteRate(std::int64_t count, double scale);

// Expands per-minute counts into arrivals; each minute is an independent
// Poisson stream confined to its own minute. Throws std::invalid_argument
// listing the available ids when the function is missing.
std::vector<Timestamp> ExpandTrace(const InvocationTrace& trace,
                                   const std::string& function_id, double scale,
                                   Millis duration, std::uint64_t seed);

enum class ArrivalMode { kPoisson, kUniform, kTrace };

struct ModelWorkload {
  std::string model_id;
  ArrivalMode mode = ArrivalMode::kPoisson;
  double rate = 0;  // requests per second (Poisson, Uniform)
  std::filesystem::path trace_file;
  std::string function_id;
  double scale = 1.0;
};

struct WorkloadSpec {
  std::vector<ModelWorkload> models;
  Millis duration = 0;
  std::uint64_t seed = 0;
};

struct Arrival {
  Timestamp time;
  std::string model_id;
};

// All model streams merged by time; ties keep the order of spec.models.
std::vector<Arrival> GenerateWorkload(const WorkloadSpec& spec);

// Independent sub-seed for stream `a`/`b` of a run seeded with `seed`.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace strait
