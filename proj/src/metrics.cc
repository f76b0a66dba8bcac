#include "strait/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace strait {

namespace {

double RelativeError(double predicted, double actual) {
  return (predicted - actual) / actual;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string Num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

double NearestRank(std::vector<double> values, double pct) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  if (!(pct > 0 && pct <= 100)) throw std::invalid_argument("pct out of (0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double AbsPercentile(const std::vector<double>& values, double pct) {
  std::vector<double> abs(values.size());
  std::transform(values.begin(), values.end(), abs.begin(),
                 [](double x) { return std::abs(x); });
  return NearestRank(std::move(abs), pct);
}

MetricsReport ComputeMetrics(const EventTrace& trace, Millis window) {
  if (!(window > 0)) throw std::invalid_argument("goodput window must be > 0");
  MetricsReport r;
  r.window = window;
  r.partial = trace.truncated;

  std::array<std::vector<double>, kNumPriorities> latencies;
  std::array<std::vector<Timestamp>, kNumPriorities> good_times;
  Timestamp horizon = 0;
  for (const auto& e : trace.events) {
    ClassMetrics& c = r.classes[Index(e.priority)];
    switch (e.kind) {
      case TraceKind::kArrival:
        ++c.arrivals;
        horizon = std::max(horizon, e.time);
        break;
      case TraceKind::kDrop:
        ++c.dropped;
        break;
      case TraceKind::kComplete:
        ++c.completed;
        latencies[Index(e.priority)].push_back(e.v[0]);
        if (e.time > e.v[1]) {
          ++c.late;
        } else {
          good_times[Index(e.priority)].push_back(e.time);
        }
        horizon = std::max(horizon, e.time);
        break;
      case TraceKind::kKernelEnd:
        r.kernel_overhead.push_back(std::abs(e.v[0] - e.v[1]) / e.v[1]);
        break;
      case TraceKind::kFeedback:
        r.intf_error.push_back(RelativeError(e.v[0], e.v[2]));
        r.model_error.push_back(RelativeError(e.v[1], e.v[2]));
        if (std::isfinite(e.v[3])) {
          r.frozen_error.push_back(RelativeError(e.v[3], e.v[2]));
        }
        r.latency_error.push_back(RelativeError(e.v[4], e.v[5]));
        break;
      case TraceKind::kCLow:
        r.c_low.push_back({e.time, e.gpu, e.v[0]});
        break;
      default:
        break;
    }
  }

  const auto windows =
      static_cast<std::size_t>(std::floor(horizon / window)) + 1;
  for (std::size_t p = 0; p < kNumPriorities; ++p) {
    ClassMetrics& c = r.classes[p];
    if (c.completed + c.dropped < c.arrivals) r.partial = true;
    if (c.arrivals > 0) {
      c.violation_pct = 100.0 * static_cast<double>(c.late + c.dropped) /
                        static_cast<double>(c.arrivals);
    }
    if (!latencies[p].empty()) {
      c.p50 = NearestRank(latencies[p], 50);
      c.p95 = NearestRank(latencies[p], 95);
      c.p99 = NearestRank(latencies[p], 99);
    }
    c.goodput.assign(windows, 0.0);
    for (Timestamp t : good_times[p]) {
      const auto w = std::min(windows - 1, static_cast<std::size_t>(t / window));
      c.goodput[w] += 1000.0 / window;
    }
  }
  return r;
}

ProfileSet PerturbProfiles(const ProfileSet& profiles, double magnitude_percent,
                           std::uint64_t seed) {
  if (!(magnitude_percent >= 0 && magnitude_percent <= 100)) {
    throw std::invalid_argument("perturbation magnitude must be in [0, 100]");
  }
  ProfileSet out = profiles;
  if (magnitude_percent == 0) return out;
  const double m = magnitude_percent / 100.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-m, m);
  auto perturb = [&](double& x) { x = std::clamp(x * (1.0 + u(rng)), 0.0, 1.0); };
  for (auto& [id, p] : out) {
    for (auto& row : p.m_metric) {
      for (double& x : row) perturb(x);
    }
    for (double& x : p.m_self_cmp) perturb(x);
    for (double& x : p.m_self_mem) perturb(x);
  }
  return out;
}

std::string SummaryJson(const MetricsReport& report) {
  using nlohmann::json;
  json j;
  j["partial"] = report.partial;
  j["goodput_window_ms"] = report.window;
  for (Priority p : {Priority::kHigh, Priority::kLow}) {
    const ClassMetrics& c = report.For(p);
    double total_good = 0;
    for (double g : c.goodput) total_good += g * report.window / 1000.0;
    j["classes"][std::string(ToString(p))] = {
        {"arrivals", c.arrivals},        {"completed", c.completed},
        {"late", c.late},                {"dropped", c.dropped},
        {"violation_pct", c.violation_pct},
        {"latency_p50_ms", c.p50},       {"latency_p95_ms", c.p95},
        {"latency_p99_ms", c.p99},       {"goodput_total", total_good}};
  }
  auto summarize = [](const std::vector<double>& v) {
    if (v.empty()) return json{{"count", 0}};
    return json{{"count", v.size()},
                {"abs_p50", AbsPercentile(v, 50)},
                {"abs_p95", AbsPercentile(v, 95)},
                {"abs_p99", AbsPercentile(v, 99)}};
  };
  j["errors"]["intf_at_schedule"] = summarize(report.intf_error);
  j["errors"]["intf_model"] = summarize(report.model_error);
  j["errors"]["intf_frozen"] = summarize(report.frozen_error);
  j["errors"]["latency"] = summarize(report.latency_error);
  j["kernel_overhead"] = summarize(report.kernel_overhead);
  return j.dump(2) + "\n";
}

std::string GoodputCsv(const MetricsReport& report) {
  std::string out = "window_start_ms,high_rps,low_rps\n";
  const auto& hp = report.For(Priority::kHigh).goodput;
  const auto& lp = report.For(Priority::kLow).goodput;
  for (std::size_t i = 0; i < hp.size(); ++i) {
    out += Num(static_cast<double>(i) * report.window) + ',' + Num(hp[i]) + ',' +
           Num(lp[i]) + '\n';
  }
  return out;
}

std::string ErrorsCsv(const MetricsReport& report) {
  std::string out = "index,intf_at_schedule,intf_model,latency,kernel_overhead\n";
  for (std::size_t i = 0; i < report.intf_error.size(); ++i) {
    out += std::to_string(i) + ',' + Num(report.intf_error[i]) + ',' +
           Num(report.model_error[i]) + ',' + Num(report.latency_error[i]) + ',' +
           Num(report.kernel_overhead[i]) + '\n';
  }
  return out;
}

std::string CLowCsv(const MetricsReport& report) {
  std::string out = "time_ms,gpu,c_low\n";
  for (const auto& c : report.c_low) {
    out += Num(c.time) + ',' + std::to_string(c.gpu) + ',' + Num(c.c_low) + '\n';
  }
  return out;
}

void WriteReport(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteText(dir / "summary.json", SummaryJson(report));
  WriteText(dir / "goodput.csv", GoodputCsv(report));
  WriteText(dir / "errors.csv", ErrorsCsv(report));
  WriteText(dir / "clow.csv", CLowCsv(report));
}

}  // namespace strait
