#include "strait/types.h"

#include <algorithm>
#include <cmath>

namespace strait {

std::string_view ToString(Priority p) {
  return p == Priority::kHigh ? "high" : "low";
}

Priority ParsePriority(std::string_view s) {
  if (s == "high" || s == "HP" || s == "High") return Priority::kHigh;
  if (s == "low" || s == "LP" || s == "Low") return Priority::kLow;
  throw std::invalid_argument("unknown priority: " + std::string(s));
}

const std::vector<std::string>& DefaultMetricNames() {
  static const std::vector<std::string> names = {"l1_cache", "l2_cache", "dram",
                                                 "tensor_pipe", "fma_pipe"};
  return names;
}

void AddInPlace(Metrics& acc, const Metrics& v) {
  if (acc.size() < v.size()) acc.resize(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
}

void SubInPlace(Metrics& acc, const Metrics& v) {
  if (acc.size() < v.size()) acc.resize(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc[i] -= v[i];
  }
}

Metrics Scaled(const Metrics& v, double factor) {
  Metrics out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [factor](double x) { return x * factor; });
  return out;
}

}  // namespace strait
