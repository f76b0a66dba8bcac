#include "strait/predictor.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace strait {

PredictorParams PredictorParams::Initial(std::size_t metric_count) {
  PredictorParams p;
  p.w.assign(metric_count, 0.1);
  return p;
}

std::vector<double> PredictorParams::Flatten() const {
  std::vector<double> flat;
  flat.reserve(FlatSize());
  flat.push_back(k);
  flat.push_back(b);
  flat.push_back(c);
  flat.insert(flat.end(), w.begin(), w.end());
  flat.push_back(w_cmp);
  flat.push_back(w_mem);
  flat.push_back(coeff[0]);
  flat.push_back(coeff[1]);
  return flat;
}

void PredictorParams::Unflatten(std::span<const double> flat) {
  if (flat.size() != FlatSize()) {
    throw std::invalid_argument("flat parameter size mismatch");
  }
  std::size_t i = 0;
  k = flat[i++];
  b = flat[i++];
  c = flat[i++];
  for (double& wi : w) wi = flat[i++];
  w_cmp = flat[i++];
  w_mem = flat[i++];
  coeff[0] = flat[i++];
  coeff[1] = flat[i++];
}

bool PredictorParams::AllFinite() const {
  auto flat = Flatten();
  return std::all_of(flat.begin(), flat.end(),
                     [](double x) { return std::isfinite(x); });
}

double PressureExponent(const Metrics& m_avg, double m_self_cmp,
                        double m_self_mem, const PredictorParams& params) {
  if (m_avg.size() != params.w.size()) {
    throw std::invalid_argument("pressure exponent: expected " +
                                std::to_string(params.w.size()) +
                                " metrics, got " + std::to_string(m_avg.size()));
  }
  double x = params.w_cmp * m_self_cmp + params.w_mem * m_self_mem;
  for (std::size_t i = 0; i < m_avg.size(); ++i) x += params.w[i] * m_avg[i];
  return x;
}

KernelEffect ComputeKernelEffect(double exponent, const PredictorParams& params,
                                 double cap) {
  const double raw = params.k * std::pow(params.b, exponent) + params.c;
  KernelEffect eff;
  if (!(raw <= cap)) {  // also catches inf / nan
    eff.value = cap;
    eff.saturated = true;
  } else if (raw < 0.0) {
    eff.value = 0.0;
    eff.clamped = true;
  } else {
    eff.value = raw;
  }
  return eff;
}

double InterferenceDegree(double kernel_eff, Priority priority,
                          const PredictorParams& params) {
  return 1.0 + kernel_eff * params.coeff[Index(priority)];
}

Millis KernelDelay(double intf, Millis t_kernel_isol) {
  return (intf - 1.0) * t_kernel_isol;
}

double PredictInterference(const Metrics& m_avg, double m_self_cmp,
                           double m_self_mem, Priority priority,
                           const PredictorParams& params, double cap) {
  const double x = PressureExponent(m_avg, m_self_cmp, m_self_mem, params);
  return InterferenceDegree(ComputeKernelEffect(x, params, cap).value, priority,
                            params);
}

LatencyEstimate EstimateLatency(const ModelProfile& profile, int batch_size,
                                Timestamp front_enqueue_time,
                                const PcieLink& link, Timestamp now,
                                const Metrics& assumed_m_avg,
                                const PredictorParams& params, double cap) {
  if (!profile.HasSize(batch_size)) {
    throw std::out_of_range("no profile entry for " + profile.model_id +
                            " batch size " + std::to_string(batch_size));
  }
  LatencyEstimate e;
  e.isolated = profile.InfIsol(batch_size);
  e.data = link.EstimateUpstreamDelay(now);
  e.intf = PredictInterference(assumed_m_avg, profile.SelfCmp(batch_size),
                               profile.SelfMem(batch_size), profile.priority,
                               params, cap);
  e.kernel = KernelDelay(e.intf, profile.KernelIsol(batch_size));
  e.queue = now - front_enqueue_time;
  e.total = e.isolated + e.data + e.kernel + e.queue;
  return e;
}

double HuberLoss(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double HuberGradient(double r, double delta) {
  if (std::abs(r) <= delta) return r;
  return r > 0 ? delta : -delta;
}

LossGradient ComputeLossGradient(const PredictorParams& params,
                                 const FeedbackSample& sample,
                                 double huber_delta, double cap) {
  LossGradient out;
  out.grad.assign(params.FlatSize(), 0.0);

  const double x = PressureExponent(sample.m_avg_twa, sample.m_self_cmp,
                                    sample.m_self_mem, params);
  const KernelEffect eff = ComputeKernelEffect(x, params, cap);
  const double coeff = params.coeff[Index(sample.priority)];
  out.prediction = 1.0 + eff.value * coeff;
  out.residual = out.prediction - sample.intf_actual;
  out.loss = HuberLoss(out.residual, huber_delta);
  out.saturated = eff.saturated;

  const double h = HuberGradient(out.residual, huber_delta);
  out.grad[params.CoeffIndex(sample.priority)] = eff.value * h;

  // A clamped effect is locally constant. A saturated one keeps the slope of
  // the uncapped curve so the sample can still pull the model back.
  if (!eff.clamped) {
    const double pow_bx = std::pow(params.b, x);
    const double d_eff_d_x = params.k * pow_bx * std::log(params.b);
    const double scale = coeff * h;
    std::size_t i = 0;
    out.grad[i++] = scale * pow_bx;                                      // k
    out.grad[i++] = scale * params.k * x * std::pow(params.b, x - 1.0);  // b
    out.grad[i++] = scale;                                               // C
    for (double m : sample.m_avg_twa) out.grad[i++] = scale * d_eff_d_x * m;
    out.grad[i++] = scale * d_eff_d_x * sample.m_self_cmp;
    out.grad[i++] = scale * d_eff_d_x * sample.m_self_mem;
  }
  out.finite = std::all_of(out.grad.begin(), out.grad.end(),
                           [](double g) { return std::isfinite(g); }) &&
               std::isfinite(out.loss);
  return out;
}

InterferencePredictor::InterferencePredictor(std::size_t metric_count)
    : params_(PredictorParams::Initial(metric_count)),
      opt_(params_.FlatSize()) {}

InterferencePredictor::InterferencePredictor(PredictorParams params,
                                             OptimizerState opt)
    : params_(std::move(params)), opt_(std::move(opt)) {
  if (opt_.m.size() != params_.FlatSize()) {
    throw std::invalid_argument("optimizer state does not match parameters");
  }
}

double InterferencePredictor::Predict(const Metrics& m_avg, double m_self_cmp,
                                      double m_self_mem,
                                      Priority priority) const {
  return PredictInterference(m_avg, m_self_cmp, m_self_mem, priority, params_,
                             cap_);
}

UpdateResult InterferencePredictor::Update(const FeedbackSample& sample) {
  LossGradient lg = ComputeLossGradient(params_, sample, huber_delta_, cap_);
  UpdateResult result{lg.prediction, lg.residual, false, lg.saturated};
  if (frozen_) return result;
  if (!lg.finite) {
    result.skipped = true;
    return result;
  }
  std::vector<double> flat = params_.Flatten();
  // The other class's coefficient and its moments stay untouched.
  auto mask = std::make_unique<bool[]>(flat.size());
  std::fill_n(mask.get(), flat.size(), true);
  const Priority other =
      sample.priority == Priority::kHigh ? Priority::kLow : Priority::kHigh;
  mask[params_.CoeffIndex(other)] = false;
  AdamStep(opt_, flat, lg.grad, std::span<const bool>(mask.get(), flat.size()));
  PredictorParams next = params_;
  next.Unflatten(flat);
  next.b = std::max(next.b, kMinBase);
  next.k = std::max(next.k, kMinScale);
  for (double& cp : next.coeff) cp = std::max(cp, kMinScale);
  if (!next.AllFinite()) {
    result.skipped = true;
    return result;
  }
  params_ = std::move(next);
  return result;
}

namespace {
using nlohmann::json;
}

std::string InterferencePredictor::ToCheckpoint() const {
  json doc;
  doc["params"] = {{"k", params_.k},
                   {"b", params_.b},
                   {"C", params_.c},
                   {"w", params_.w},
                   {"w_cmp", params_.w_cmp},
                   {"w_mem", params_.w_mem},
                   {"coeff_high", params_.coeff[0]},
                   {"coeff_low", params_.coeff[1]}};
  doc["optimizer"] = {{"alpha", opt_.config.alpha},
                      {"beta1", opt_.config.beta1},
                      {"beta2", opt_.config.beta2},
                      {"epsilon", opt_.config.epsilon},
                      {"huber_delta", huber_delta_},
                      {"kernel_effect_cap", cap_},
                      {"t", opt_.t},
                      {"m", opt_.m},
                      {"v", opt_.v}};
  return doc.dump(2) + "\n";
}

InterferencePredictor InterferencePredictor::FromCheckpoint(
    const std::string& text) {
  try {
    const json doc = json::parse(text);
    const json& p = doc.at("params");
    PredictorParams params;
    params.k = p.at("k").get<double>();
    params.b = p.at("b").get<double>();
    params.c = p.at("C").get<double>();
    params.w = p.at("w").get<std::vector<double>>();
    params.w_cmp = p.at("w_cmp").get<double>();
    params.w_mem = p.at("w_mem").get<double>();
    params.coeff = {p.at("coeff_high").get<double>(),
                    p.at("coeff_low").get<double>()};
    const json& o = doc.at("optimizer");
    OptimizerState opt;
    opt.config.alpha = o.at("alpha").get<double>();
    opt.config.beta1 = o.at("beta1").get<double>();
    opt.config.beta2 = o.at("beta2").get<double>();
    opt.config.epsilon = o.at("epsilon").get<double>();
    opt.t = o.at("t").get<std::int64_t>();
    opt.m = o.at("m").get<std::vector<double>>();
    opt.v = o.at("v").get<std::vector<double>>();
    InterferencePredictor pred(std::move(params), std::move(opt));
    pred.huber_delta_ = o.at("huber_delta").get<double>();
    pred.cap_ = o.at("kernel_effect_cap").get<double>();
    if (pred.params_.b <= 1.0 || pred.params_.k <= 0.0 ||
        !pred.params_.AllFinite()) {
      throw std::invalid_argument("checkpoint parameters out of range");
    }
    return pred;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed checkpoint: ") +
                                e.what());
  }
}

void InterferencePredictor::SaveCheckpoint(
    const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << ToCheckpoint();
}

InterferencePredictor InterferencePredictor::LoadCheckpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromCheckpoint(ss.str());
}

}  // namespace strait
