#pragma once

#include <vector>

#include "strait/types.h"

namespace strait {

// Step-hold signal of per-metric throughput: each sample's value holds until
// the next sample's timestamp.
class ThroughputTimeline {
 public:
  struct Sample {
    Timestamp time;
    Metrics value;
  };

  ThroughputTimeline() = default;

  // Appends a sample. A second sample at the same timestamp replaces the
  // first. Throws SimulationError if `time` precedes the last sample.
  void Record(Timestamp time, Metrics value);

  const std::vector<Sample>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }

  // sum(v_i * d_i) / sum(d_i), the last sample held until `end_time`.
  // Throws std::invalid_argument on an empty timeline or an end time before
  // the last sample. A zero-length signal returns the last value.
  Metrics TimeWeightedAverage(Timestamp end_time) const;

  // Same average restricted to [start_time, end_time]. The value in force at
  // `start_time` is the latest sample at or before it, or zero if none.
  Metrics TimeWeightedAverage(Timestamp start_time, Timestamp end_time) const;

 private:
  std::vector<Sample> samples_;
};

}  // namespace strait
