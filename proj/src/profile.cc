#include "strait/profile.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace strait {

namespace {

using nlohmann::json;

const std::set<std::string>& KnownFields() {
  static const std::set<std::string> fields = {
      "model_id",    "priority",      "deadline",   "batch_timeout",
      "max_batch_size", "t_inf_isol", "t_htod_isol", "t_kernel_isol",
      "m_metric",    "m_self_cmp",    "m_self_mem"};
  return fields;
}

void CheckLatencies(const std::vector<Millis>& v, const char* field,
                    std::vector<ProfileViolation>& out) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int j = static_cast<int>(i) + 1;
    if (!std::isfinite(v[i]) || v[i] <= 0) {
      out.push_back({field, j, "latency must be positive"});
    }
    if (i > 0 && v[i] < v[i - 1]) {
      out.push_back({field, j, "latency non-monotone at j=" + std::to_string(j)});
    }
  }
}

void CheckFraction(double x, const char* field, int j,
                   std::vector<ProfileViolation>& out) {
  if (!(x >= 0.0 && x <= 1.0)) {
    out.push_back({field, j, "throughput out of [0,1]"});
  }
}

template <typename T>
T Require(const json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw ProfileParseError(std::string("missing field: ") + key);
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ProfileParseError(std::string("bad value for ") + key + ": " +
                            e.what());
  }
}

}  // namespace

std::string ProfileViolation::ToString() const {
  std::string s = field;
  if (batch_size > 0) s += "[" + std::to_string(batch_size) + "]";
  return s + ": " + rule;
}

std::vector<ProfileViolation> ValidateProfile(const ModelProfile& p,
                                              std::size_t metric_count) {
  std::vector<ProfileViolation> out;
  if (p.model_id.empty()) out.push_back({"model_id", 0, "must be non-empty"});
  if (p.max_batch_size < 1) {
    out.push_back({"max_batch_size", 0, "must be a positive integer"});
    return out;
  }
  const auto n = static_cast<std::size_t>(p.max_batch_size);
  auto check_len = [&](std::size_t len, const char* field) {
    if (len != n) {
      out.push_back({field, 0,
                     "expected " + std::to_string(n) + " entries, got " +
                         std::to_string(len)});
      return false;
    }
    return true;
  };
  bool lengths_ok = check_len(p.t_inf_isol.size(), "t_inf_isol");
  lengths_ok &= check_len(p.t_htod_isol.size(), "t_htod_isol");
  lengths_ok &= check_len(p.t_kernel_isol.size(), "t_kernel_isol");
  lengths_ok &= check_len(p.m_metric.size(), "m_metric");
  lengths_ok &= check_len(p.m_self_cmp.size(), "m_self_cmp");
  lengths_ok &= check_len(p.m_self_mem.size(), "m_self_mem");
  if (!lengths_ok) return out;

  CheckLatencies(p.t_inf_isol, "t_inf_isol", out);
  CheckLatencies(p.t_htod_isol, "t_htod_isol", out);
  CheckLatencies(p.t_kernel_isol, "t_kernel_isol", out);

  for (std::size_t i = 0; i < n; ++i) {
    const int j = static_cast<int>(i) + 1;
    if (p.t_inf_isol[i] < p.t_htod_isol[i] + p.t_kernel_isol[i]) {
      out.push_back({"t_inf_isol", j, "must be >= t_htod_isol + t_kernel_isol"});
    }
    if (p.m_metric[i].size() != metric_count) {
      out.push_back({"m_metric", j,
                     "expected " + std::to_string(metric_count) + " metrics"});
    }
    for (double x : p.m_metric[i]) CheckFraction(x, "m_metric", j, out);
    CheckFraction(p.m_self_cmp[i], "m_self_cmp", j, out);
    CheckFraction(p.m_self_mem[i], "m_self_mem", j, out);
  }

  if (!std::isfinite(p.batch_timeout) || p.batch_timeout < 0) {
    out.push_back({"batch_timeout", 0, "must be non-negative"});
  }
  if (!std::isfinite(p.deadline) || p.deadline <= p.t_inf_isol[0]) {
    out.push_back({"deadline", 0, "must exceed t_inf_isol[1]"});
  }
  return out;
}

ProfileInvalidError::ProfileInvalidError(
    std::string model_id, std::vector<ProfileViolation> violations)
    : std::runtime_error([&] {
        std::string msg = "invalid profile '" + model_id + "':";
        for (const auto& v : violations) msg += "\n  " + v.ToString();
        return msg;
      }()),
      violations_(std::move(violations)) {}

ModelProfile ParseProfile(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ProfileParseError(std::string("malformed profile: ") + e.what());
  }
  if (!doc.is_object()) throw ProfileParseError("profile must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (!KnownFields().count(key)) {
      throw ProfileParseError("unknown field: " + key);
    }
  }
  ModelProfile p;
  p.model_id = Require<std::string>(doc, "model_id");
  try {
    p.priority = ParsePriority(Require<std::string>(doc, "priority"));
  } catch (const std::invalid_argument& e) {
    throw ProfileParseError(e.what());
  }
  p.deadline = Require<double>(doc, "deadline");
  p.batch_timeout = Require<double>(doc, "batch_timeout");
  p.max_batch_size = Require<int>(doc, "max_batch_size");
  p.t_inf_isol = Require<std::vector<double>>(doc, "t_inf_isol");
  p.t_htod_isol = Require<std::vector<double>>(doc, "t_htod_isol");
  p.t_kernel_isol = Require<std::vector<double>>(doc, "t_kernel_isol");
  p.m_metric = Require<std::vector<Metrics>>(doc, "m_metric");
  p.m_self_cmp = Require<std::vector<double>>(doc, "m_self_cmp");
  p.m_self_mem = Require<std::vector<double>>(doc, "m_self_mem");
  return p;
}

std::string SerializeProfile(const ModelProfile& p) {
  json doc = {{"model_id", p.model_id},
              {"priority", std::string(ToString(p.priority))},
              {"deadline", p.deadline},
              {"batch_timeout", p.batch_timeout},
              {"max_batch_size", p.max_batch_size},
              {"t_inf_isol", p.t_inf_isol},
              {"t_htod_isol", p.t_htod_isol},
              {"t_kernel_isol", p.t_kernel_isol},
              {"m_metric", p.m_metric},
              {"m_self_cmp", p.m_self_cmp},
              {"m_self_mem", p.m_self_mem}};
  return doc.dump(2) + "\n";
}

ModelProfile LoadProfileFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProfileParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ModelProfile p;
  try {
    p = ParseProfile(ss.str());
  } catch (const ProfileParseError& e) {
    throw ProfileParseError(path.string() + ": " + e.what());
  }
  auto violations = ValidateProfile(p);
  if (!violations.empty()) {
    throw ProfileInvalidError(p.model_id, std::move(violations));
  }
  return p;
}

void SaveProfileFile(const ModelProfile& profile,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << SerializeProfile(profile);
}

ProfileSet LoadProfileDir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  ProfileSet set;
  for (const auto& f : files) {
    auto p = LoadProfileFile(f);
    auto id = p.model_id;
    if (!set.emplace(id, std::move(p)).second) {
      throw ProfileParseError("duplicate model_id " + id + " in " + f.string());
    }
  }
  return set;
}

namespace {

struct Shape {
  const char* id;
  Priority priority;
  Millis deadline;
  Millis kernel_b1;
  Millis kernel_per_item;
  Millis htod_per_item;
  Millis residual;
  // Peak throughput per metric (l1, l2, dram, tensor, fma) at large batch.
  std::array<double, kDefaultMetricCount> peak;
};

// Batch-size response of throughput: rises quickly, then saturates.
double Saturation(int j) { return 1.0 - 0.55 * std::exp(-(j - 1) / 2.5); }

ModelProfile FromShape(const Shape& s) {
  constexpr int kMaxBatch = 8;
  ModelProfile p;
  p.model_id = s.id;
  p.priority = s.priority;
  p.deadline = s.deadline;
  p.batch_timeout = 0.1 * s.deadline;
  p.max_batch_size = kMaxBatch;
  for (int j = 1; j <= kMaxBatch; ++j) {
    const Millis kernel = s.kernel_b1 + s.kernel_per_item * (j - 1);
    const Millis htod = s.htod_per_item * j;
    p.t_kernel_isol.push_back(kernel);
    p.t_htod_isol.push_back(htod);
    p.t_inf_isol.push_back(kernel + htod + s.residual);
    Metrics m(kDefaultMetricCount);
    for (std::size_t i = 0; i < kDefaultMetricCount; ++i) {
      m[i] = std::min(1.0, s.peak[i] * Saturation(j));
    }
    p.m_self_cmp.push_back(m[3]);  // tensor pipe
    p.m_self_mem.push_back(m[1]);  // L2 cache
    p.m_metric.push_back(std::move(m));
  }
  return p;
}

}  // namespace

ProfileSet ReferenceProfiles() {
  static const Shape kShapes[] = {
      {"resnet50", Priority::kHigh, 8.0, 1.2, 0.45, 0.15, 0.1,
       {0.30, 0.35, 0.25, 0.40, 0.20}},
      {"vit_b16", Priority::kHigh, 15.0, 2.4, 0.95, 0.15, 0.1,
       {0.25, 0.40, 0.30, 0.55, 0.15}},
      {"convnext_b", Priority::kLow, 25.0, 3.0, 1.1, 0.15, 0.1,
       {0.35, 0.40, 0.30, 0.45, 0.25}},
      {"vgg19", Priority::kLow, 25.0, 3.4, 1.2, 0.15, 0.1,
       {0.40, 0.45, 0.40, 0.50, 0.30}},
      {"yolov8n", Priority::kLow, 20.0, 1.5, 0.5, 0.35, 0.15,
       {0.30, 0.30, 0.35, 0.20, 0.35}},
      {"roberta_b", Priority::kLow, 45.0, 2.0, 0.9, 0.02, 0.1,
       {0.20, 0.35, 0.25, 0.50, 0.15}},
  };
  ProfileSet set;
  for (const auto& s : kShapes) set.emplace(s.id, FromShape(s));
  return set;
}

}  // namespace strait
