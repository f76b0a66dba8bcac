#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "strait/profile.h"
#include "strait/types.h"

namespace strait::testing {

// Linear-in-size profile with constant throughput, easy to reason about by
// hand. Latencies for size j: htod*j, kernel*j, inf = (htod + kernel)*j + residual.
inline ModelProfile LinearProfile(const std::string& id, Priority priority,
                                  Millis deadline, Millis kernel_per_item,
                                  Millis htod_per_item = 0.5,
                                  Millis residual = 0.5, int max_batch = 8,
                                  double throughput = 0.2,
                                  Millis batch_timeout = 1.0) {
  ModelProfile p;
  p.model_id = id;
  p.priority = priority;
  p.deadline = deadline;
  p.batch_timeout = batch_timeout;
  p.max_batch_size = max_batch;
  for (int j = 1; j <= max_batch; ++j) {
    p.t_htod_isol.push_back(htod_per_item * j);
    p.t_kernel_isol.push_back(kernel_per_item * j);
    p.t_inf_isol.push_back((htod_per_item + kernel_per_item) * j + residual);
    p.m_metric.push_back(Metrics(kDefaultMetricCount, throughput));
    p.m_self_cmp.push_back(throughput);
    p.m_self_mem.push_back(throughput);
  }
  return p;
}

inline bool RelClose(double a, double b, double rel, double abs_floor = 1e-300) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), abs_floor});
}

inline Metrics RandomMetrics(std::mt19937_64& rng, std::size_t n = kDefaultMetricCount) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Metrics m(n);
  for (double& x : m) x = u(rng);
  return m;
}

}  // namespace strait::testing
