#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "strait/ground_truth.h"
#include "strait/policies.h"
#include "strait/predictor.h"
#include "strait/profile.h"
#include "strait/scheduler.h"
#include "strait/trace.h"
#include "strait/workload.h"

namespace strait {

// Switches the hidden interference behaviour part way through a run.
struct GroundTruthShift {
  Timestamp at = 0;
  GroundTruthParams params;
};

struct SimConfig {
  // What the scheduler and predictor believe (possibly perturbed).
  ProfileSet profiles;
  // What the simulated GPUs execute. Empty means identical to `profiles`.
  ProfileSet true_profiles;
  int num_gpus = 4;
  int concurrency_limit = 4;
  PolicyKind policy = PolicyKind::kStrait;
  StraitOptions strait_options;
  GroundTruthParams ground_truth;
  std::optional<GroundTruthShift> shift;
  // Stream priorities give high-priority kernels their gamma advantage.
  bool stream_priority = true;
  std::vector<Arrival> arrivals;
  Millis duration = 0;
  std::uint64_t seed = 0;
  std::optional<InterferencePredictor> initial_predictor;
  // Keep a frozen copy of the predictor from the shift onwards and log its
  // predictions next to the adaptive ones.
  bool track_frozen_predictor = false;
  // Safety stop; a run that has not drained by then is marked truncated.
  Millis drain_limit = 60'000.0;

  // Throws std::invalid_argument describing the first problem found.
  void Validate() const;
};

enum class EventKind : std::uint8_t {
  kKernelComplete = 0,
  kTransferComplete = 1,
  kRequestArrival = 2,
  kBatchTimeout = 3,
  kAimdTick = 4,
};

struct SimEvent {
  Timestamp time = 0;
  EventKind kind = EventKind::kAimdTick;
  std::uint64_t seq = 0;
  std::int64_t id = 0;        // request index, batch id
  std::uint64_t version = 0;  // for rescheduled kernel completions
};

// Orders events by time, then kind, then insertion.
struct SimEventLater {
  bool operator()(const SimEvent& a, const SimEvent& b) const;
};

// Per-batch state of the progress-rate execution model.
struct ExecutionState {
  BatchId batch_id = 0;
  GpuId gpu = 0;
  const ModelProfile* true_profile = nullptr;
  int size = 0;
  Priority priority = Priority::kHigh;
  double noise = 1.0;
  Millis remaining_work = 0;  // isolated-kernel milliseconds left
  double slowdown = 1.0;
  Timestamp last_update = 0;
  Timestamp kernel_start = 0;
  double work_integral = 0;  // integral of 1/slowdown over elapsed kernel time
  std::uint64_t version = 0;
  bool resident = false;     // kernel executing
};

struct SimResult {
  EventTrace trace;
  InterferencePredictor predictor;
  std::vector<GpuRuntimeState> final_gpus;
};

class Simulator {
 public:
  explicit Simulator(SimConfig config);
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  SimResult Run();

  // Exposed for tests: progress-rate bookkeeping on one GPU.
  void AdvanceGpu(GpuId gpu, Timestamp now);
  void RescheduleGpu(GpuId gpu, Timestamp now);

 private:
  void Push(Timestamp t, EventKind kind, std::int64_t id,
            std::uint64_t version = 0);
  void HandleArrival(const SimEvent& ev);
  void HandleTransferComplete(const SimEvent& ev);
  void HandleKernelComplete(const SimEvent& ev);
  void HandleTick(const SimEvent& ev);
  void RunPass(Timestamp now);
  void StartBatch(const ScheduleDecision& d, Timestamp now);
  void RecordCLow(Timestamp now);
  void MaybeShift(Timestamp now);
  bool Busy() const;
  const GroundTruthParams& Truth() const { return *truth_; }
  TaskQueue& QueueFor(const std::string& model_id);

  SimConfig cfg_;
  const ProfileSet* true_profiles_ = nullptr;
  std::unique_ptr<SchedulingPolicy> policy_;
  InterferencePredictor predictor_;
  std::optional<InterferencePredictor> frozen_;
  std::vector<GpuRuntimeState> gpus_;
  std::vector<TaskQueue> queues_;
  std::vector<Timestamp> link_free_;  // actual per-GPU link availability
  std::map<BatchId, ExecutionState> exec_;
  std::map<BatchId, LatencyEstimate> estimates_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, SimEventLater> events_;
  std::uint64_t seq_ = 0;
  BatchId next_batch_id_ = 0;
  std::mt19937_64 rng_;
  const GroundTruthParams* truth_ = nullptr;
  bool shifted_ = false;
  std::vector<double> last_clow_;
  std::size_t queued_requests_ = 0;
  EventTrace trace_;
};

// Convenience wrapper.
SimResult RunSimulation(SimConfig config);

}  // namespace strait
