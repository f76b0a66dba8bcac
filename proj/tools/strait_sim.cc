// Command-line front end: run experiments, sweeps and ablations, recompute
// reports from traces and perturb profiles.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "strait/config.h"
#include "strait/experiment.h"
#include "strait/metrics.h"
#include "strait/profile.h"

namespace fs = std::filesystem;
using namespace strait;

namespace {

constexpr int kConfigFailure = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string policy;
  std::optional<double> duration;
  std::string out_dir = "out";
};

void AddCommon(CLI::App* cmd, CommonFlags& f, bool with_policy = true) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)")->required();
  cmd->add_option("--seed", f.seed, "Override the config seed");
  if (with_policy) {
    cmd->add_option("--policy", f.policy, "strait, temporal, static or reactive");
  }
  cmd->add_option("--duration", f.duration, "Override the duration in ms");
  cmd->add_option("--out-dir", f.out_dir, "Output directory");
}

ExperimentConfig LoadWithOverrides(const CommonFlags& f) {
  ExperimentConfig c = LoadExperimentConfig(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.policy.empty()) c.policy = ParsePolicyKind(f.policy);
  if (f.duration) {
    if (*f.duration < 0) throw ConfigError("--duration must be >= 0");
    c.duration = *f.duration;
  }
  return c;
}

void PrintSummary(const RunOutput& out) {
  const auto& hp = out.report.For(Priority::kHigh);
  const auto& lp = out.report.For(Priority::kLow);
  std::printf("%-32s HP viol %6.2f%% (n=%lld)  LP viol %6.2f%% (n=%lld)%s\n",
              out.name.c_str(), hp.violation_pct,
              static_cast<long long>(hp.arrivals), lp.violation_pct,
              static_cast<long long>(lp.arrivals),
              out.report.partial ? "  [partial]" : "");
}

void WriteSweepCsv(const std::vector<RunOutput>& runs,
                   const std::vector<ExperimentConfig>& configs,
                   const fs::path& path) {
  std::ofstream out(path);
  out << "name,policy,seed,hp_violation_pct,lp_violation_pct,hp_p99_ms,lp_p99_ms,"
         "partial\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i].report;
    out << runs[i].name << ',' << ToString(configs[i].policy) << ','
        << configs[i].seed << ',' << r.For(Priority::kHigh).violation_pct << ','
        << r.For(Priority::kLow).violation_pct << ',' << r.For(Priority::kHigh).p99
        << ',' << r.For(Priority::kLow).p99 << ',' << (r.partial ? 1 : 0) << '\n';
  }
}

int RunBatch(const std::vector<ExperimentConfig>& configs, int jobs,
             const fs::path& out_dir) {
  const auto runs = RunMany(configs, jobs);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    WriteRunOutput(runs[i], configs[i], out_dir / runs[i].name);
    PrintSummary(runs[i]);
  }
  WriteSweepCsv(runs, configs, out_dir / "sweep.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deadline- and interference-aware inference scheduling simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one experiment");
  AddCommon(run, run_flags);

  CommonFlags sweep_flags;
  std::vector<std::uint64_t> sweep_seeds = {1, 2, 3, 4, 5};
  std::vector<std::string> sweep_policies;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "Run a seed by policy grid");
  AddCommon(sweep, sweep_flags, false);
  sweep->add_option("--seeds", sweep_seeds, "Seeds to run");
  sweep->add_option("--policies", sweep_policies,
                    "Policies to run (default: the config's)");
  sweep->add_option("--jobs", jobs, "Parallel runs");

  std::string trace_path;
  double window = 1000.0;
  std::string report_out = "report";
  auto* report = app.add_subcommand("report", "Recompute metrics from a trace");
  report->add_option("--trace", trace_path, "Trace CSV")->required();
  report->add_option("--window", window, "Goodput window in ms");
  report->add_option("--out-dir", report_out, "Output directory");

  std::string profiles_dir;
  double magnitude = 15.0;
  std::uint64_t perturb_seed = 1;
  std::string perturb_out = "perturbed";
  auto* perturb = app.add_subcommand("perturb", "Perturb profile throughputs");
  perturb->add_option("--profiles", profiles_dir,
                      "Profile directory (default: built-in reference set)");
  perturb->add_option("--magnitude", magnitude, "Perturbation in percent")
      ->check(CLI::Range(0.0, 100.0));
  perturb->add_option("--seed", perturb_seed, "Random seed");
  perturb->add_option("--out-dir", perturb_out, "Output directory");

  CommonFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "Run the mechanism ablation set");
  AddCommon(ablate, ablate_flags, false);
  ablate->add_option("--jobs", jobs, "Parallel runs");

  std::string gen_out = "profiles";
  auto* gen = app.add_subcommand("gen-profiles", "Write the reference profiles");
  gen->add_option("--out-dir", gen_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig c = LoadWithOverrides(run_flags);
      const RunOutput out = RunExperiment(c);
      WriteRunOutput(out, c, run_flags.out_dir);
      PrintSummary(out);
    } else if (*sweep) {
      const ExperimentConfig base = LoadWithOverrides(sweep_flags);
      std::vector<ExperimentConfig> configs;
      std::vector<PolicyKind> policies;
      for (const auto& p : sweep_policies) policies.push_back(ParsePolicyKind(p));
      if (policies.empty()) policies.push_back(base.policy);
      for (PolicyKind p : policies) {
        ExperimentConfig c = base;
        c.policy = p;
        c.name = base.name + "_" + std::string(ToString(p));
        for (auto& s : SeedSweep(c, sweep_seeds)) configs.push_back(std::move(s));
      }
      return RunBatch(configs, jobs, sweep_flags.out_dir);
    } else if (*ablate) {
      return RunBatch(AblationVariants(LoadWithOverrides(ablate_flags)), jobs,
                      ablate_flags.out_dir);
    } else if (*report) {
      const EventTrace trace = EventTrace::Load(trace_path);
      const MetricsReport r = ComputeMetrics(trace, window);
      WriteReport(r, report_out);
      std::cout << SummaryJson(r);
    } else if (*perturb) {
      const ProfileSet in =
          profiles_dir.empty() ? ReferenceProfiles() : LoadProfileDir(profiles_dir);
      fs::create_directories(perturb_out);
      for (const auto& [id, p] : PerturbProfiles(in, magnitude, perturb_seed)) {
        SaveProfileFile(p, fs::path(perturb_out) / (id + ".json"));
      }
    } else if (*gen) {
      fs::create_directories(gen_out);
      for (const auto& [id, p] : ReferenceProfiles()) {
        SaveProfileFile(p, fs::path(gen_out) / (id + ".json"));
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const ProfileParseError& e) {
    std::cerr << "profile error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const ProfileInvalidError& e) {
    std::cerr << "profile error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
