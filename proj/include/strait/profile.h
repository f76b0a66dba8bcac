#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "strait/types.h"

namespace strait {

// Offline measurements for one model. Per-batch-size vectors are indexed by
// batch size minus one.
struct ModelProfile {
  std::string model_id;
  Priority priority = Priority::kHigh;
  Millis deadline = 0;
  Millis batch_timeout = 0;
  int max_batch_size = 0;
  std::vector<Millis> t_inf_isol;     // p95 isolated end-to-end latency
  std::vector<Millis> t_htod_isol;    // p95 isolated upstream transfer
  std::vector<Millis> t_kernel_isol;  // p95 isolated kernel execution
  std::vector<Metrics> m_metric;      // time-weighted avg throughput per metric
  std::vector<double> m_self_cmp;
  std::vector<double> m_self_mem;

  Millis InfIsol(int size) const { return t_inf_isol.at(size - 1); }
  Millis HtodIsol(int size) const { return t_htod_isol.at(size - 1); }
  Millis KernelIsol(int size) const { return t_kernel_isol.at(size - 1); }
  const Metrics& Throughput(int size) const { return m_metric.at(size - 1); }
  double SelfCmp(int size) const { return m_self_cmp.at(size - 1); }
  double SelfMem(int size) const { return m_self_mem.at(size - 1); }
  // Latency outside upstream transfer and kernel (downstream copy, launch).
  Millis ResidualIsol(int size) const {
    return InfIsol(size) - HtodIsol(size) - KernelIsol(size);
  }
  bool HasSize(int size) const { return size >= 1 && size <= max_batch_size; }
};

struct ProfileViolation {
  std::string field;
  int batch_size = 0;  // 0 when the rule is not per batch size
  std::string rule;

  std::string ToString() const;
};

// Empty result means the profile is valid.
std::vector<ProfileViolation> ValidateProfile(const ModelProfile& profile,
                                              std::size_t metric_count =
                                                  kDefaultMetricCount);

// Malformed documents: syntax errors, missing or unknown fields, wrong types.
class ProfileParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invariant violations found in an otherwise well-formed document.
class ProfileInvalidError : public std::runtime_error {
 public:
  ProfileInvalidError(std::string model_id,
                      std::vector<ProfileViolation> violations);
  const std::vector<ProfileViolation>& violations() const {
    return violations_;
  }

 private:
  std::vector<ProfileViolation> violations_;
};

ModelProfile ParseProfile(const std::string& json_text);
std::string SerializeProfile(const ModelProfile& profile);

// Reads and validates. Throws ProfileParseError or ProfileInvalidError.
ModelProfile LoadProfileFile(const std::filesystem::path& path);
void SaveProfileFile(const ModelProfile& profile,
                     const std::filesystem::path& path);

using ProfileSet = std::map<std::string, ModelProfile>;

// Loads every *.json file in a directory.
ProfileSet LoadProfileDir(const std::filesystem::path& dir);

// Synthetic profiles for six common vision and language models on an
// L4-class GPU. Latencies and throughputs are generated from simple shapes.
ProfileSet ReferenceProfiles();

}  // namespace strait
