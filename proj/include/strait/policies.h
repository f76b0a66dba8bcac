#pragma once

#include <memory>
#include <string>
#include <vector>

#include "strait/predictor.h"
#include "strait/scheduler.h"

namespace strait {

enum class PolicyKind { kStrait, kTemporal, kStaticSpatial, kReactiveSpatial };

std::string_view ToString(PolicyKind kind);
PolicyKind ParsePolicyKind(std::string_view s);

// Mechanism switches for ablation runs of the Strait policy.
struct StraitOptions {
  bool priority_scan = true;     // scan queues high priority first
  bool meet_check = true;        // own-deadline feasibility under interference
  bool violate_and_aimd = true;  // protect running batches, throttle LP
};

struct PassResult {
  std::vector<ScheduleDecision> decisions;
  std::vector<Request> dropped;
};

// Mutable view the scheduling pass operates on.
struct SchedulingContext {
  std::vector<TaskQueue>& queues;
  std::vector<GpuRuntimeState>& gpus;
  const InterferencePredictor& predictor;
  Timestamp now;
  BatchId& next_batch_id;
};

class SchedulingPolicy {
 public:
  virtual ~SchedulingPolicy() = default;
  virtual PolicyKind kind() const = 0;

  // One scheduling pass over every queue. Dispatched batches are already
  // logged in the target GPU's running list when this returns.
  virtual PassResult Schedule(SchedulingContext& ctx) = 0;

  // A high-priority request missed its deadline. `gpu` is -1 when the miss
  // came from early dropping and is not tied to a GPU.
  virtual void OnHpViolation(std::vector<GpuRuntimeState>& /*gpus*/,
                             GpuId /*gpu*/, Timestamp /*now*/) {}

  // Periodic control tick.
  virtual void OnTick(std::vector<GpuRuntimeState>& /*gpus*/,
                      Timestamp /*now*/) {}
};

// Queue indices in scan order: descending priority, then oldest front
// request. Empty queues are skipped.
std::vector<std::size_t> ScanOrder(const std::vector<TaskQueue>& queues,
                                   bool by_priority);

class StraitPolicy final : public SchedulingPolicy {
 public:
  explicit StraitPolicy(StraitOptions options = {}) : options_(options) {}
  PolicyKind kind() const override { return PolicyKind::kStrait; }
  const StraitOptions& options() const { return options_; }

  PassResult Schedule(SchedulingContext& ctx) override;
  void OnHpViolation(std::vector<GpuRuntimeState>& gpus, GpuId gpu,
                     Timestamp now) override;
  void OnTick(std::vector<GpuRuntimeState>& gpus, Timestamp now) override;

  struct GpuChoice {
    GpuId gpu = -1;
    MeetResult meet;
  };
  // Feasible GPU with the lowest estimated latency for `candidate`, if any.
  std::optional<GpuChoice> BestGpu(const std::vector<GpuRuntimeState>& gpus,
                                   const Candidate& candidate,
                                   const InterferencePredictor& predictor,
                                   Timestamp now) const;

 private:
  StraitOptions options_;
};

// One batch at a time per GPU.
class TemporalPolicy final : public SchedulingPolicy {
 public:
  PolicyKind kind() const override { return PolicyKind::kTemporal; }
  PassResult Schedule(SchedulingContext& ctx) override;
};

// Fixed concurrency cap, no interference checks.
class StaticSpatialPolicy final : public SchedulingPolicy {
 public:
  explicit StaticSpatialPolicy(int cap = 3) : cap_(cap) {}
  PolicyKind kind() const override { return PolicyKind::kStaticSpatial; }
  PassResult Schedule(SchedulingContext& ctx) override;

 private:
  int cap_;
};

struct ReactiveState {
  int lp_allowance = 3;
  int default_allowance = 3;
  int min_allowance = 1;
  int hp_limit = 3;
  int global_limit = 4;
  Millis reset_period = 200.0;
  Timestamp last_reset = 0;
};

// Shrinks the low-priority concurrency allowance after high-priority misses
// and restores it periodically.
class ReactiveSpatialPolicy final : public SchedulingPolicy {
 public:
  explicit ReactiveSpatialPolicy(ReactiveState state = {}) : state_(state) {}
  PolicyKind kind() const override { return PolicyKind::kReactiveSpatial; }
  const ReactiveState& state() const { return state_; }

  PassResult Schedule(SchedulingContext& ctx) override;
  void OnHpViolation(std::vector<GpuRuntimeState>& gpus, GpuId gpu,
                     Timestamp now) override;
  void OnTick(std::vector<GpuRuntimeState>& gpus, Timestamp now) override;

 private:
  ReactiveState state_;
};

std::unique_ptr<SchedulingPolicy> MakePolicy(PolicyKind kind,
                                             StraitOptions options = {});

}  // namespace strait
