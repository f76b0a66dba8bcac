#include "strait/timeline.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace strait {

void ThroughputTimeline::Record(Timestamp time, Metrics value) {
  if (!samples_.empty()) {
    Sample& last = samples_.back();
    if (time < last.time) {
      throw SimulationError("timeline time regression: " +
                            std::to_string(time) + " < " +
                            std::to_string(last.time));
    }
    if (time == last.time) {
      last.value = std::move(value);
      return;
    }
  }
  samples_.push_back({time, std::move(value)});
}

Metrics ThroughputTimeline::TimeWeightedAverage(Timestamp end_time) const {
  if (samples_.empty()) throw std::invalid_argument("no samples");
  return TimeWeightedAverage(samples_.front().time, end_time);
}

Metrics ThroughputTimeline::TimeWeightedAverage(Timestamp start_time,
                                                Timestamp end_time) const {
  if (samples_.empty()) throw std::invalid_argument("no samples");
  if (end_time < samples_.back().time) {
    throw std::invalid_argument("end time precedes last sample");
  }
  const std::size_t dim = samples_.back().value.size();
  Metrics weighted(dim, 0.0);
  Metrics held(dim, 0.0);
  double total = 0.0;

  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Timestamp seg_end =
        i + 1 < samples_.size() ? samples_[i + 1].time : end_time;
    if (seg_end <= start_time) {
      held = samples_[i].value;
      continue;
    }
    const Timestamp seg_start = std::max(samples_[i].time, start_time);
    if (seg_start > seg_end) continue;
    // Gap between the window start and the first sample inside it.
    if (i == 0 && samples_[0].time > start_time) {
      total += samples_[0].time - start_time;
    }
    const double d = seg_end - seg_start;
    const Metrics& v = samples_[i].value;
    for (std::size_t m = 0; m < dim && m < v.size(); ++m) weighted[m] += v[m] * d;
    total += d;
    held = v;
  }
  if (total <= 0.0) return held;
  for (double& w : weighted) w /= total;
  return weighted;
}

}  // namespace strait
