#include "strait/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace strait {

namespace {

using nlohmann::json;

void CheckKeys(const json& j, const std::set<std::string>& allowed,
               const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void Get(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

GroundTruthParams GroundTruthFromJson(const json& j, const std::string& where) {
  CheckKeys(j,
            {"family", "kappa", "beta", "c", "w", "w_cmp", "w_mem", "gamma_high",
             "gamma_low", "noise_sigma", "htod_noise_sigma", "effect_cap"},
            where);
  GroundTruthParams g;
  std::string family = std::string(ToString(g.family));
  Get(j, "family", family, where);
  try {
    g.family = ParseOracleFamily(family);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  Get(j, "kappa", g.kappa, where);
  Get(j, "beta", g.beta, where);
  Get(j, "c", g.c, where);
  Get(j, "w", g.w, where);
  Get(j, "w_cmp", g.w_cmp, where);
  Get(j, "w_mem", g.w_mem, where);
  Get(j, "gamma_high", g.gamma[Index(Priority::kHigh)], where);
  Get(j, "gamma_low", g.gamma[Index(Priority::kLow)], where);
  Get(j, "noise_sigma", g.noise_sigma, where);
  Get(j, "htod_noise_sigma", g.htod_noise_sigma, where);
  Get(j, "effect_cap", g.effect_cap, where);
  try {
    g.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return g;
}

json GroundTruthToJson(const GroundTruthParams& g) {
  return json{{"family", std::string(ToString(g.family))},
              {"kappa", g.kappa},
              {"beta", g.beta},
              {"c", g.c},
              {"w", g.w},
              {"w_cmp", g.w_cmp},
              {"w_mem", g.w_mem},
              {"gamma_high", g.gamma[Index(Priority::kHigh)]},
              {"gamma_low", g.gamma[Index(Priority::kLow)]},
              {"noise_sigma", g.noise_sigma},
              {"htod_noise_sigma", g.htod_noise_sigma},
              {"effect_cap", g.effect_cap}};
}

ArrivalMode ParseMode(const std::string& s, const std::string& where) {
  if (s == "poisson") return ArrivalMode::kPoisson;
  if (s == "uniform") return ArrivalMode::kUniform;
  if (s == "trace") return ArrivalMode::kTrace;
  throw ConfigError(where + ": unknown arrival mode '" + s + "'");
}

std::string ModeName(ArrivalMode m) {
  switch (m) {
    case ArrivalMode::kPoisson: return "poisson";
    case ArrivalMode::kUniform: return "uniform";
    case ArrivalMode::kTrace: return "trace";
  }
  return "poisson";
}

}  // namespace

GroundTruthParams ParseGroundTruth(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("ground truth: ") + e.what());
  }
  return GroundTruthFromJson(j, "ground_truth");
}

ExperimentConfig ParseExperimentConfig(const std::string& json_text,
                                       const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const std::string w = "config";
  CheckKeys(j,
            {"name", "profiles_dir", "num_gpus", "concurrency_limit", "policy",
             "strait_options", "stream_priority", "duration_ms", "seed",
             "workload", "ground_truth", "shift", "track_frozen_predictor",
             "perturbation_percent", "predictor_checkpoint", "drain_limit_ms",
             "goodput_window_ms"},
            w);
  ExperimentConfig c;
  Get(j, "name", c.name, w);
  std::string path;
  Get(j, "profiles_dir", path, w);
  if (!path.empty()) c.profiles_dir = Resolve(base_dir, path);
  Get(j, "num_gpus", c.num_gpus, w);
  Get(j, "concurrency_limit", c.concurrency_limit, w);
  std::string policy = std::string(ToString(c.policy));
  Get(j, "policy", policy, w);
  try {
    c.policy = ParsePolicyKind(policy);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(w + ": " + e.what());
  }
  if (j.contains("strait_options")) {
    const json& o = j["strait_options"];
    const std::string ow = w + ".strait_options";
    CheckKeys(o, {"priority_scan", "meet_check", "violate_and_aimd"}, ow);
    Get(o, "priority_scan", c.strait_options.priority_scan, ow);
    Get(o, "meet_check", c.strait_options.meet_check, ow);
    Get(o, "violate_and_aimd", c.strait_options.violate_and_aimd, ow);
  }
  Get(j, "stream_priority", c.stream_priority, w);
  Get(j, "duration_ms", c.duration, w);
  Get(j, "seed", c.seed, w);
  Get(j, "track_frozen_predictor", c.track_frozen_predictor, w);
  Get(j, "perturbation_percent", c.perturbation_percent, w);
  path.clear();
  Get(j, "predictor_checkpoint", path, w);
  if (!path.empty()) c.predictor_checkpoint = Resolve(base_dir, path);
  Get(j, "drain_limit_ms", c.drain_limit, w);
  Get(j, "goodput_window_ms", c.goodput_window, w);

  if (j.contains("ground_truth")) {
    c.ground_truth = GroundTruthFromJson(j["ground_truth"], w + ".ground_truth");
  }
  if (j.contains("shift")) {
    const json& s = j["shift"];
    const std::string sw = w + ".shift";
    CheckKeys(s, {"at_ms", "ground_truth"}, sw);
    if (!s.contains("at_ms") || !s.contains("ground_truth")) {
      throw ConfigError(sw + ": needs at_ms and ground_truth");
    }
    Timestamp at = 0;
    Get(s, "at_ms", at, sw);
    c.shift_at = at;
    c.shift_ground_truth = GroundTruthFromJson(s["ground_truth"], sw + ".ground_truth");
  }

  if (!j.contains("workload")) throw ConfigError(w + ": missing workload");
  const json& wl = j["workload"];
  CheckKeys(wl, {"models"}, w + ".workload");
  if (!wl.contains("models") || !wl["models"].is_array()) {
    throw ConfigError(w + ".workload: models must be an array");
  }
  for (const auto& m : wl["models"]) {
    const std::string mw = w + ".workload.models";
    CheckKeys(m, {"model_id", "mode", "rate", "trace_file", "function_id", "scale"},
              mw);
    ModelWorkload mwk;
    Get(m, "model_id", mwk.model_id, mw);
    if (mwk.model_id.empty()) throw ConfigError(mw + ": model_id required");
    std::string mode = "poisson";
    Get(m, "mode", mode, mw);
    mwk.mode = ParseMode(mode, mw);
    Get(m, "rate", mwk.rate, mw);
    std::string trace;
    Get(m, "trace_file", trace, mw);
    if (!trace.empty()) mwk.trace_file = Resolve(base_dir, trace);
    Get(m, "function_id", mwk.function_id, mw);
    Get(m, "scale", mwk.scale, mw);
    if (mwk.rate < 0) throw ConfigError(mw + ": negative rate");
    if (mwk.mode == ArrivalMode::kTrace &&
        (mwk.trace_file.empty() || mwk.function_id.empty())) {
      throw ConfigError(mw + ": trace mode needs trace_file and function_id");
    }
    c.workload.models.push_back(std::move(mwk));
  }

  if (c.num_gpus < 1) throw ConfigError(w + ": num_gpus must be >= 1");
  if (c.concurrency_limit < 1) throw ConfigError(w + ": concurrency_limit must be >= 1");
  if (!(c.duration >= 0)) throw ConfigError(w + ": duration_ms must be >= 0");
  if (!(c.perturbation_percent >= 0 && c.perturbation_percent <= 100)) {
    throw ConfigError(w + ": perturbation_percent must be in [0, 100]");
  }
  if (!(c.goodput_window > 0)) throw ConfigError(w + ": goodput_window_ms must be > 0");
  if (!(c.drain_limit >= 0)) throw ConfigError(w + ": drain_limit_ms must be >= 0");
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseExperimentConfig(ss.str(), path.parent_path());
}

std::string SerializeExperimentConfig(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  if (!c.profiles_dir.empty()) j["profiles_dir"] = c.profiles_dir.string();
  j["num_gpus"] = c.num_gpus;
  j["concurrency_limit"] = c.concurrency_limit;
  j["policy"] = std::string(ToString(c.policy));
  j["strait_options"] = {{"priority_scan", c.strait_options.priority_scan},
                         {"meet_check", c.strait_options.meet_check},
                         {"violate_and_aimd", c.strait_options.violate_and_aimd}};
  j["stream_priority"] = c.stream_priority;
  j["duration_ms"] = c.duration;
  j["seed"] = c.seed;
  j["ground_truth"] = GroundTruthToJson(c.ground_truth);
  if (c.shift_at) {
    j["shift"] = {{"at_ms", *c.shift_at},
                  {"ground_truth", GroundTruthToJson(c.shift_ground_truth)}};
  }
  j["track_frozen_predictor"] = c.track_frozen_predictor;
  j["perturbation_percent"] = c.perturbation_percent;
  if (!c.predictor_checkpoint.empty()) {
    j["predictor_checkpoint"] = c.predictor_checkpoint.string();
  }
  j["drain_limit_ms"] = c.drain_limit;
  j["goodput_window_ms"] = c.goodput_window;
  json models = json::array();
  for (const auto& m : c.workload.models) {
    json e = {{"model_id", m.model_id}, {"mode", ModeName(m.mode)}, {"rate", m.rate}};
    if (m.mode == ArrivalMode::kTrace) {
      e["trace_file"] = m.trace_file.string();
      e["function_id"] = m.function_id;
      e["scale"] = m.scale;
    }
    models.push_back(std::move(e));
  }
  j["workload"] = {{"models", models}};
  return j.dump(2) + "\n";
}

}  // namespace strait
