#include "strait/experiment.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

namespace strait {

SimConfig BuildSimConfig(const ExperimentConfig& config) {
  SimConfig sim;
  const ProfileSet truth = config.profiles_dir.empty()
                               ? ReferenceProfiles()
                               : LoadProfileDir(config.profiles_dir);
  if (config.perturbation_percent > 0) {
    sim.profiles = PerturbProfiles(truth, config.perturbation_percent,
                                   DeriveSeed(config.seed, 0x9e47));
    sim.true_profiles = truth;
  } else {
    sim.profiles = truth;
  }
  sim.num_gpus = config.num_gpus;
  sim.concurrency_limit = config.concurrency_limit;
  sim.policy = config.policy;
  sim.strait_options = config.strait_options;
  sim.ground_truth = config.ground_truth;
  if (config.shift_at) {
    sim.shift = GroundTruthShift{*config.shift_at, config.shift_ground_truth};
  }
  sim.stream_priority = config.stream_priority;
  WorkloadSpec spec = config.workload;
  spec.duration = config.duration;
  spec.seed = config.seed;
  sim.arrivals = GenerateWorkload(spec);
  sim.duration = config.duration;
  sim.seed = config.seed;
  if (!config.predictor_checkpoint.empty()) {
    sim.initial_predictor = InterferencePredictor::LoadCheckpoint(config.predictor_checkpoint);
  }
  sim.track_frozen_predictor = config.track_frozen_predictor;
  sim.drain_limit = config.drain_limit;
  return sim;
}

RunOutput RunExperiment(const ExperimentConfig& config) {
  SimResult result = RunSimulation(BuildSimConfig(config));
  MetricsReport report = ComputeMetrics(result.trace, config.goodput_window);
  return RunOutput{config.name, std::move(result.trace), std::move(report),
                   std::move(result.predictor)};
}

void WriteRunOutput(const RunOutput& out, const ExperimentConfig& config,
                    const std::filesystem::path& dir) {
  WriteReport(out.report, dir);
  out.trace.Save(dir / "trace.csv");
  out.predictor.SaveCheckpoint(dir / "predictor.json");
  std::ofstream cfg(dir / "config.json");
  cfg << SerializeExperimentConfig(config);
}

std::vector<RunOutput> RunMany(const std::vector<ExperimentConfig>& configs,
                               int jobs) {
  std::vector<RunOutput> results(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = RunExperiment(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, jobs));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < std::min(n, configs.size()); ++t) {
    threads.emplace_back(worker);
  }
  worker();
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<ExperimentConfig> AblationVariants(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  auto add = [&](const std::string& suffix, auto&& tweak) {
    ExperimentConfig c = base;
    c.policy = PolicyKind::kStrait;
    c.strait_options = StraitOptions{};
    c.stream_priority = true;
    c.name = base.name + "_" + suffix;
    tweak(c);
    out.push_back(std::move(c));
  };
  add("full", [](ExperimentConfig&) {});
  add("no_priority_scan", [](ExperimentConfig& c) { c.strait_options.priority_scan = false; });
  add("no_meet_check", [](ExperimentConfig& c) { c.strait_options.meet_check = false; });
  add("no_violate_aimd",
      [](ExperimentConfig& c) { c.strait_options.violate_and_aimd = false; });
  add("no_stream_priority", [](ExperimentConfig& c) { c.stream_priority = false; });
  return out;
}

std::vector<ExperimentConfig> SeedSweep(const ExperimentConfig& base,
                                        const std::vector<std::uint64_t>& seeds) {
  std::vector<ExperimentConfig> out;
  for (auto s : seeds) {
    ExperimentConfig c = base;
    c.seed = s;
    c.name = base.name + "_seed" + std::to_string(s);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace strait
