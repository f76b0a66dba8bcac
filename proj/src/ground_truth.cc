#include "strait/ground_truth.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace strait {

std::string_view ToString(OracleFamily f) {
  return f == OracleFamily::kExponential ? "exponential" : "quadratic";
}

OracleFamily ParseOracleFamily(std::string_view s) {
  if (s == "exponential") return OracleFamily::kExponential;
  if (s == "quadratic") return OracleFamily::kQuadratic;
  throw std::invalid_argument("unknown oracle family: " + std::string(s));
}

void GroundTruthParams::Validate() const {
  if (!(beta > 1.0)) throw std::invalid_argument("ground truth: beta must be > 1");
  if (!(kappa > 0.0)) throw std::invalid_argument("ground truth: kappa must be > 0");
  if (!(noise_sigma >= 0.0) || !(htod_noise_sigma >= 0.0)) {
    throw std::invalid_argument("ground truth: noise sigma must be >= 0");
  }
  for (double g : gamma) {
    if (!(g > 0.0)) throw std::invalid_argument("ground truth: gamma must be > 0");
  }
}

double GroundTruthSlowdown(const Metrics& colocated, double self_cmp,
                           double self_mem, Priority priority,
                           const GroundTruthParams& p, double noise) {
  if (colocated.size() != p.w.size()) {
    throw std::invalid_argument("ground truth: metric count mismatch");
  }
  double x = p.w_cmp * self_cmp + p.w_mem * self_mem;
  for (std::size_t i = 0; i < colocated.size(); ++i) x += p.w[i] * colocated[i];
  double effect = p.family == OracleFamily::kExponential
                      ? p.kappa * std::pow(p.beta, x) + p.c
                      : p.kappa * (1.0 + x * x * std::log(p.beta)) + p.c;
  effect = std::clamp(effect, 0.0, p.effect_cap);
  return 1.0 + effect * p.gamma[Index(priority)] * noise;
}

double DrawLogNormal(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 1.0;
  std::normal_distribution<double> normal(0.0, sigma);
  return std::exp(normal(rng));
}

}  // namespace strait
