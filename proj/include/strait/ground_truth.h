#pragma once

#include <array>
#include <random>
#include <string_view>
#include <vector>

#include "strait/types.h"

namespace strait {

enum class OracleFamily { kExponential, kQuadratic };

std::string_view ToString(OracleFamily f);
OracleFamily ParseOracleFamily(std::string_view s);

// Hidden interference behaviour of the simulated GPUs. The exponential family
// matches the predictor's hypothesis class; the quadratic family does not.
struct GroundTruthParams {
  OracleFamily family = OracleFamily::kExponential;
  double kappa = 0.25;
  double beta = 2.718281828459045;
  double c = -0.35;
  std::vector<double> w = {0.2, 0.3, 0.35, 0.3, 0.2};
  double w_cmp = 0.5;
  double w_mem = 0.5;
  // Per-priority sensitivity; high priority streams suffer less.
  std::array<double, kNumPriorities> gamma = {0.5, 1.0};
  double noise_sigma = 0.0;       // lognormal sigma of the per-batch factor
  double htod_noise_sigma = 0.0;  // lognormal sigma of upstream transfers
  double effect_cap = 50.0;

  // Throws std::invalid_argument when an invariant fails.
  void Validate() const;
};

// Instantaneous slowdown of a kernel-resident batch given the aggregate
// throughput of the other resident batches. `noise` is the batch's fixed
// multiplicative draw (1 when noise is off).
double GroundTruthSlowdown(const Metrics& colocated, double self_cmp,
                           double self_mem, Priority priority,
                           const GroundTruthParams& params, double noise = 1.0);

// Lognormal(0, sigma) draw; exactly 1 when sigma is 0.
double DrawLogNormal(std::mt19937_64& rng, double sigma);

}  // namespace strait
