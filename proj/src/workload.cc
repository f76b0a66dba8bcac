#include "strait/workload.h"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace strait {

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<Timestamp> GenPoisson(double rate_per_s, Millis duration,
                                  std::uint64_t seed) {
  std::vector<Timestamp> out;
  if (rate_per_s <= 0 || duration <= 0) return out;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate_per_s / 1000.0);
  Timestamp t = gap(rng);
  while (t < duration) {
    out.push_back(t);
    t += gap(rng);
  }
  return out;
}

std::vector<Timestamp> GenUniform(double rate_per_s, Millis duration) {
  std::vector<Timestamp> out;
  if (rate_per_s <= 0 || duration <= 0) return out;
  const double spacing = 1000.0 / rate_per_s;
  for (std::int64_t k = 0;; ++k) {
    const Timestamp t = static_cast<double>(k) * spacing;
    if (t >= duration) break;
    out.push_back(t);
  }
  return out;
}

std::vector<std::string> InvocationTrace::FunctionIds() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : counts) ids.push_back(id);
  return ids;
}

InvocationTrace ParseInvocationTrace(const std::string& csv_text) {
  InvocationTrace trace;
  std::istringstream in(csv_text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("function_id", 0) == 0) continue;
    std::istringstream fields(line);
    std::string id, minute, count;
    if (!std::getline(fields, id, ',') || !std::getline(fields, minute, ',') ||
        !std::getline(fields, count)) {
      throw std::invalid_argument("trace line " + std::to_string(line_no) +
                                  ": expected function_id,minute_index,count");
    }
    try {
      const auto m = std::stoll(minute);
      const auto c = std::stoll(count);
      if (m < 0 || c < 0) throw std::out_of_range("negative");
      trace.counts[id][m] += c;
    } catch (const std::logic_error&) {
      throw std::invalid_argument("trace line " + std::to_string(line_no) +
                                  ": bad number");
    }
  }
  return trace;
}

InvocationTrace LoadInvocationTrace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open trace " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseInvocationTrace(ss.str());
}

double MinuteRate(std::int64_t count, double scale) {
  return static_cast<double>(count) * scale / 60.0;
}

std::vector<Timestamp> ExpandTrace(const InvocationTrace& trace,
                                   const std::string& function_id, double scale,
                                   Millis duration, std::uint64_t seed) {
  auto it = trace.counts.find(function_id);
  if (it == trace.counts.end()) {
    std::string msg = "function '" + function_id + "' not in trace; available:";
    for (const auto& id : trace.FunctionIds()) msg += " " + id;
    throw std::invalid_argument(msg);
  }
  if (!(scale > 0)) throw std::invalid_argument("trace scale must be > 0");
  constexpr Millis kMinute = 60'000.0;
  std::vector<Timestamp> out;
  for (const auto& [minute, count] : it->second) {
    const Timestamp base = static_cast<double>(minute) * kMinute;
    if (base >= duration) break;
    const Millis span = std::min(kMinute, duration - base);
    const auto sub_seed = DeriveSeed(seed, static_cast<std::uint64_t>(minute));
    for (Timestamp t : GenPoisson(MinuteRate(count, scale), span, sub_seed)) {
      out.push_back(base + t);
    }
  }
  return out;
}

std::vector<Arrival> GenerateWorkload(const WorkloadSpec& spec) {
  std::vector<std::pair<Arrival, std::size_t>> tagged;
  std::map<std::filesystem::path, InvocationTrace> traces;
  for (std::size_t i = 0; i < spec.models.size(); ++i) {
    const ModelWorkload& m = spec.models[i];
    if (m.rate < 0) throw std::invalid_argument("negative rate for " + m.model_id);
    const auto seed = DeriveSeed(spec.seed, i + 1);
    std::vector<Timestamp> times;
    switch (m.mode) {
      case ArrivalMode::kPoisson:
        times = GenPoisson(m.rate, spec.duration, seed);
        break;
      case ArrivalMode::kUniform:
        times = GenUniform(m.rate, spec.duration);
        break;
      case ArrivalMode::kTrace: {
        auto t = traces.find(m.trace_file);
        if (t == traces.end()) {
          t = traces.emplace(m.trace_file, LoadInvocationTrace(m.trace_file)).first;
        }
        times = ExpandTrace(t->second, m.function_id, m.scale, spec.duration, seed);
        break;
      }
    }
    for (Timestamp ts : times) tagged.push_back({{ts, m.model_id}, i});
  }
  std::stable_sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) {
    if (a.first.time != b.first.time) return a.first.time < b.first.time;
    return a.second < b.second;
  });
  std::vector<Arrival> out;
  out.reserve(tagged.size());
  for (auto& [a, _] : tagged) out.push_back(std::move(a));
  return out;
}

}  // namespace strait
