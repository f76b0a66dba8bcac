#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "strait/pcie.h"
#include "strait/predictor.h"
#include "strait/profile.h"
#include "strait/timeline.h"
#include "strait/types.h"

namespace strait {

// Front-end queue of one model. Requests wait here until a batch forms.
struct TaskQueue {
  const ModelProfile* profile = nullptr;
  std::deque<Request> pending;

  const std::string& model_id() const { return profile->model_id; }
  Priority priority() const { return profile->priority; }
  bool empty() const { return pending.empty(); }
  Timestamp FrontEnqueue() const { return pending.front().arrival_time; }
  Timestamp TimeoutDeadline() const {
    return FrontEnqueue() + profile->batch_timeout;
  }
  // A full batch is available or the front request has waited long enough.
  bool Ready(Timestamp now) const;
};

// Adaptive cap on the aggregate throughput of low-priority batches, in
// percent of peak.
struct AimdState {
  double c_low = 75.0;
  double floor = 75.0;
  double ceiling = 100.0;
  double increase = 0.25;
  Millis tick = 100.0;
  Timestamp last_tick = 0;
};

// Additive increase for every whole tick elapsed since last_tick.
AimdState AimdTick(AimdState state, Timestamp now);
// Reset to the floor after a high-priority deadline miss.
AimdState AimdOnHpViolation(AimdState state);

struct RunningTaskEntry {
  Batch batch;
  const ModelProfile* profile = nullptr;
  Metrics throughput;  // profiled demand at this batch size
  double intf_predicted = 1.0;
  // Aggregate throughput of other kernel-resident batches, excluding this one.
  ThroughputTimeline timeline;
  Timestamp kernel_start_estimate = 0;
  Timestamp deadline_abs = 0;
  ReservationId reservation = -1;
  bool kernel_started = false;
};

struct GpuRuntimeState {
  GpuId gpu_id = 0;
  std::vector<RunningTaskEntry> running;
  int concurrency_limit = 4;
  PcieLink pcie;
  AimdState aimd;
  // Sum of profiled throughput of every running batch.
  Metrics aggregate_throughput;

  GpuRuntimeState() = default;
  GpuRuntimeState(GpuId id, std::size_t metric_count, int limit = 4)
      : gpu_id(id),
        concurrency_limit(limit),
        aggregate_throughput(metric_count, 0.0) {}

  bool HasFreeSlot() const {
    return static_cast<int>(running.size()) < concurrency_limit;
  }
  int CountRunning(Priority p) const;
  RunningTaskEntry* Find(BatchId id);
  const RunningTaskEntry* Find(BatchId id) const;

  void RecomputeAggregate();
  // Sum over running batches other than `exclude`.
  Metrics AggregateExcluding(BatchId exclude) const;
  // Sum over kernel-resident batches other than `exclude`.
  Metrics KernelResidentExcluding(BatchId exclude) const;
  Metrics LowPriorityAggregate() const;
  std::size_t metric_count() const { return aggregate_throughput.size(); }
};

// A batch the scheduler is considering: `size` requests from the front of a
// queue.
struct Candidate {
  const ModelProfile* profile = nullptr;
  int size = 0;
  Timestamp front_enqueue = 0;
  Timestamp deadline_abs = 0;

  Priority priority() const { return profile->priority; }
  const Metrics& throughput() const { return profile->Throughput(size); }
};

Candidate MakeCandidate(const TaskQueue& queue, int size);

struct ScheduleDecision {
  Timestamp time = 0;
  BatchId batch_id = 0;
  std::string model_id;
  Priority priority = Priority::kHigh;
  int size = 0;
  GpuId gpu_id = -1;
  Millis estimated_latency = 0;
  double intf_predicted = 1.0;
  Metrics assumed_m_avg;
};

// Removes requests that cannot finish even in isolation:
// deadline_abs - now < t_inf_isol[1]. Order of survivors is preserved.
std::vector<Request> EarlyDrop(TaskQueue& queue, Timestamp now);

// Interference the predictor currently attributes to a running batch, from
// the time-weighted co-location it has seen since its kernel started.
double CurrentInterference(const RunningTaskEntry& entry, Timestamp now,
                           const InterferencePredictor& predictor);

// Completion time of a running batch when its remaining kernel work runs at
// slowdown `intf_new`. Progress so far is inferred from elapsed kernel time at
// slowdown `intf_current`.
Timestamp ProjectCompletion(const RunningTaskEntry& entry, double intf_current,
                            double intf_new, Timestamp now);

// True if placing `candidate` on `gpu` would (a) push any low-priority
// aggregate metric above c_low, for low-priority candidates, or (b) make a
// running batch of equal or higher priority miss a deadline it would
// otherwise meet.
bool CheckViolate(const GpuRuntimeState& gpu, const Candidate& candidate,
                  const InterferencePredictor& predictor, Timestamp now);

struct MeetResult {
  bool meets = false;
  LatencyEstimate estimate;
  Metrics assumed_m_avg;
};

// Estimated latency assuming the batch sees half of the GPU's current
// aggregate throughput; meets iff the front request's deadline holds.
MeetResult CheckMeet(const GpuRuntimeState& gpu, const Candidate& candidate,
                     const InterferencePredictor& predictor, Timestamp now);

// Largest k in [1, max_k] with feasible(k), assuming feasibility is monotone
// non-increasing in k. Returns 0 when even k = 1 is infeasible.
int LargestFeasible(int max_k, const std::function<bool(int)>& feasible);

// Moves the first `size` requests of `queue` into a new batch on `gpu`:
// reserves the link, logs the running entry and refreshes the aggregate.
ScheduleDecision Dispatch(TaskQueue& queue, GpuRuntimeState& gpu, int size,
                          BatchId batch_id, Timestamp now,
                          const LatencyEstimate& estimate,
                          const Metrics& assumed_m_avg);

// Marks a batch's kernel as resident and appends co-location samples to every
// running entry on the GPU.
void OnKernelStart(GpuRuntimeState& gpu, BatchId batch_id, Timestamp now);

struct CompletionOutcome {
  RunningTaskEntry entry;
  FeedbackSample sample;
  UpdateResult update;
  Timestamp completion_time = 0;  // results back on the host
  std::vector<RequestId> late_requests;
  bool hp_violation = false;
};

// Removes a finished batch, feeds its measured interference back into the
// predictor and reports which requests missed their deadlines. Throws
// SimulationError for an unknown batch.
CompletionOutcome OnBatchComplete(GpuRuntimeState& gpu, BatchId batch_id,
                                  Millis measured_kernel, Timestamp now,
                                  InterferencePredictor& predictor);

}  // namespace strait
