#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "strait/ground_truth.h"
#include "strait/policies.h"
#include "strait/workload.h"

namespace strait {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One experiment, as read from a JSON document. Relative paths are resolved
// against the directory of the config file.
struct ExperimentConfig {
  std::string name = "run";
  // Directory of profile JSON files; empty selects the built-in reference set.
  std::filesystem::path profiles_dir;
  int num_gpus = 4;
  int concurrency_limit = 4;
  PolicyKind policy = PolicyKind::kStrait;
  StraitOptions strait_options;
  bool stream_priority = true;
  Millis duration = 10'000.0;
  std::uint64_t seed = 1;
  WorkloadSpec workload;  // duration and seed are filled from the fields above
  GroundTruthParams ground_truth;
  std::optional<Timestamp> shift_at;
  GroundTruthParams shift_ground_truth;
  bool track_frozen_predictor = false;
  double perturbation_percent = 0;
  std::filesystem::path predictor_checkpoint;
  Millis drain_limit = 60'000.0;
  Millis goodput_window = 1000.0;
};

// Throws ConfigError on syntax errors, unknown keys or bad values.
ExperimentConfig ParseExperimentConfig(const std::string& json_text,
                                       const std::filesystem::path& base_dir = {});
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);
std::string SerializeExperimentConfig(const ExperimentConfig& config);

GroundTruthParams ParseGroundTruth(const std::string& json_text);

}  // namespace strait
