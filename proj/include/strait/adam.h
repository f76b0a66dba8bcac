#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace strait {

struct AdamConfig {
  double alpha = 0.0075;
  double beta1 = 0.7;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<double> m;  // first moment per parameter
  std::vector<double> v;  // second moment per parameter
  std::int64_t t = 0;     // steps taken

  explicit OptimizerState(std::size_t num_params = 0, AdamConfig cfg = {})
      : config(cfg), m(num_params, 0.0), v(num_params, 0.0) {}
};

// One Adam step. Entries whose `active` flag is false keep their parameter
// and moments untouched; an empty mask means all entries are active. The
// step counter always advances by one.
void AdamStep(OptimizerState& state, std::span<double> params,
              std::span<const double> grads, std::span<const bool> active = {});

}  // namespace strait
