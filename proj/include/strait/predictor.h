#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "strait/adam.h"
#include "strait/pcie.h"
#include "strait/profile.h"
#include "strait/types.h"

namespace strait {

// Learnable symbols of the interference model:
//   kernel_eff = k * b^(w . m_avg + w_cmp * m_self_cmp + w_mem * m_self_mem) + C
//   intf       = 1 + kernel_eff * coeff[priority]
struct PredictorParams {
  double k = 0.1;
  double b = 2.718281828459045;
  double c = 0.0;
  std::vector<double> w;
  double w_cmp = 0.1;
  double w_mem = 0.1;
  std::array<double, kNumPriorities> coeff = {0.5, 1.0};

  // Conservative starting point: small positive interference everywhere.
  static PredictorParams Initial(std::size_t metric_count = kDefaultMetricCount);

  // Flat layout used by the optimizer:
  //   [k, b, C, w_0 .. w_{n-1}, w_cmp, w_mem, coeff_high, coeff_low]
  std::size_t FlatSize() const { return w.size() + 7; }
  std::vector<double> Flatten() const;
  void Unflatten(std::span<const double> flat);
  std::size_t CoeffIndex(Priority p) const { return w.size() + 5 + Index(p); }

  bool AllFinite() const;
};

inline constexpr double kDefaultKernelEffectCap = 50.0;
inline constexpr double kDefaultHuberDelta = 0.50;
inline constexpr double kMinBase = 1.0 + 1e-6;
inline constexpr double kMinScale = 1e-6;

// Linear pressure term in the exponent. Throws std::invalid_argument when
// m_avg and the weights disagree in length.
double PressureExponent(const Metrics& m_avg, double m_self_cmp,
                        double m_self_mem, const PredictorParams& params);

struct KernelEffect {
  double value = 0;
  bool clamped = false;    // k*b^x + C fell below zero
  bool saturated = false;  // hit the overflow cap
};

KernelEffect ComputeKernelEffect(double exponent, const PredictorParams& params,
                                 double cap = kDefaultKernelEffectCap);

double InterferenceDegree(double kernel_eff, Priority priority,
                          const PredictorParams& params);

// Extra kernel time caused by a slowdown of `intf`.
Millis KernelDelay(double intf, Millis t_kernel_isol);

// Full chain from resource pressure to slowdown factor.
double PredictInterference(const Metrics& m_avg, double m_self_cmp,
                           double m_self_mem, Priority priority,
                           const PredictorParams& params,
                           double cap = kDefaultKernelEffectCap);

struct LatencyEstimate {
  Millis total = 0;
  Millis isolated = 0;
  Millis data = 0;
  Millis kernel = 0;
  Millis queue = 0;
  double intf = 1.0;
};

// Isolated latency + upstream delay + kernel interference delay + time
// already spent queued. Throws std::out_of_range for a missing batch size.
LatencyEstimate EstimateLatency(const ModelProfile& profile, int batch_size,
                                Timestamp front_enqueue_time,
                                const PcieLink& link, Timestamp now,
                                const Metrics& assumed_m_avg,
                                const PredictorParams& params,
                                double cap = kDefaultKernelEffectCap);

double HuberLoss(double residual, double delta);
double HuberGradient(double residual, double delta);

// Completion feedback for one batch.
struct FeedbackSample {
  BatchId batch_id = 0;
  Metrics m_avg_twa;
  double m_self_cmp = 0;
  double m_self_mem = 0;
  Priority priority = Priority::kHigh;
  double intf_predicted = 1.0;  // at schedule time, for reporting
  double intf_actual = 1.0;     // measured kernel / isolated kernel
};

struct LossGradient {
  double loss = 0;
  double prediction = 1.0;
  double residual = 0;  // prediction - actual
  std::vector<double> grad;
  bool saturated = false;
  bool finite = true;
};

// Huber loss of the current-parameter prediction against the sample, with
// analytic gradients in the flat parameter layout. Only the sample's own
// priority coefficient receives a gradient.
LossGradient ComputeLossGradient(const PredictorParams& params,
                                 const FeedbackSample& sample,
                                 double huber_delta = kDefaultHuberDelta,
                                 double cap = kDefaultKernelEffectCap);

struct UpdateResult {
  double prediction_before = 1.0;
  double residual = 0;
  bool skipped = false;    // non-finite gradient
  bool saturated = false;  // kernel effect hit the cap
};

// Online learner shared by all GPUs of a node.
class InterferencePredictor {
 public:
  explicit InterferencePredictor(std::size_t metric_count = kDefaultMetricCount);
  InterferencePredictor(PredictorParams params, OptimizerState opt);

  const PredictorParams& params() const { return params_; }
  const OptimizerState& optimizer() const { return opt_; }
  double huber_delta() const { return huber_delta_; }
  double kernel_effect_cap() const { return cap_; }
  void set_params(PredictorParams p) { params_ = std::move(p); }

  // A frozen predictor keeps predicting but ignores feedback.
  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  double Predict(const Metrics& m_avg, double m_self_cmp, double m_self_mem,
                 Priority priority) const;

  UpdateResult Update(const FeedbackSample& sample);

  std::string ToCheckpoint() const;
  static InterferencePredictor FromCheckpoint(const std::string& text);
  void SaveCheckpoint(const std::filesystem::path& path) const;
  static InterferencePredictor LoadCheckpoint(const std::filesystem::path& path);

 private:
  PredictorParams params_;
  OptimizerState opt_;
  double huber_delta_ = kDefaultHuberDelta;
  double cap_ = kDefaultKernelEffectCap;
  bool frozen_ = false;
};

}  // namespace strait
