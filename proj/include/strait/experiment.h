#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "strait/config.h"
#include "strait/metrics.h"
#include "strait/simulator.h"

namespace strait {

struct RunOutput {
  std::string name;
  EventTrace trace;
  MetricsReport report;
  InterferencePredictor predictor;
};

// Loads profiles, generates the workload and applies any perturbation. The
// scheduler sees perturbed profiles while the simulated GPUs keep the
// originals.
SimConfig BuildSimConfig(const ExperimentConfig& config);

RunOutput RunExperiment(const ExperimentConfig& config);

// trace.csv, predictor.json, config.json and the report files under `dir`.
void WriteRunOutput(const RunOutput& out, const ExperimentConfig& config,
                    const std::filesystem::path& dir);

// Runs independent experiments on up to `jobs` threads. Results keep the
// input order.
std::vector<RunOutput> RunMany(const std::vector<ExperimentConfig>& configs,
                               int jobs);

// Named mechanism variants of a Strait run: full, no_priority_scan,
// no_meet_check, no_violate_aimd, no_stream_priority.
std::vector<ExperimentConfig> AblationVariants(const ExperimentConfig& base);

// One config per seed, names suffixed with the seed.
std::vector<ExperimentConfig> SeedSweep(const ExperimentConfig& base,
                                        const std::vector<std::uint64_t>& seeds);

}  // namespace strait
