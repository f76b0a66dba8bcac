#include "strait/policies.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace strait {

std::string_view ToString(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kStrait: return "strait";
    case PolicyKind::kTemporal: return "temporal";
    case PolicyKind::kStaticSpatial: return "static";
    case PolicyKind::kReactiveSpatial: return "reactive";
  }
  return "unknown";
}

PolicyKind ParsePolicyKind(std::string_view s) {
  if (s == "strait") return PolicyKind::kStrait;
  if (s == "temporal") return PolicyKind::kTemporal;
  if (s == "static") return PolicyKind::kStaticSpatial;
  if (s == "reactive") return PolicyKind::kReactiveSpatial;
  throw std::invalid_argument("unknown policy: " + std::string(s));
}

std::vector<std::size_t> ScanOrder(const std::vector<TaskQueue>& queues,
                                   bool by_priority) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < queues.size(); ++i) {
    if (!queues[i].empty()) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& qa = queues[a];
    const auto& qb = queues[b];
    if (by_priority && qa.priority() != qb.priority()) {
      return HigherFirst(qa.priority(), qb.priority());
    }
    return qa.FrontEnqueue() < qb.FrontEnqueue();
  });
  return order;
}

namespace {

int MaxBatch(const TaskQueue& q) {
  return std::min(static_cast<int>(q.pending.size()), q.profile->max_batch_size);
}

void AppendDropped(PassResult& result, std::vector<Request> dropped) {
  for (auto& r : dropped) result.dropped.push_back(std::move(r));
}

// Spatial baselines place a batch on the least-loaded eligible GPU.
template <typename Eligible>
GpuId LeastLoaded(const std::vector<GpuRuntimeState>& gpus, Eligible eligible) {
  GpuId best = -1;
  std::size_t best_load = 0;
  for (const auto& g : gpus) {
    if (!eligible(g)) continue;
    if (best < 0 || g.running.size() < best_load) {
      best = g.gpu_id;
      best_load = g.running.size();
    }
  }
  return best;
}

GpuRuntimeState& GpuById(std::vector<GpuRuntimeState>& gpus, GpuId id) {
  for (auto& g : gpus) {
    if (g.gpu_id == id) return g;
  }
  throw SimulationError("unknown gpu " + std::to_string(id));
}

// Dispatches min(queue, max batch) requests with a logged latency estimate.
void DispatchFixedSize(SchedulingContext& ctx, TaskQueue& q, GpuId gpu_id,
                       PassResult& result) {
  GpuRuntimeState& gpu = GpuById(ctx.gpus, gpu_id);
  const Candidate cand = MakeCandidate(q, MaxBatch(q));
  const MeetResult meet = CheckMeet(gpu, cand, ctx.predictor, ctx.now);
  result.decisions.push_back(Dispatch(q, gpu, cand.size, ctx.next_batch_id++,
                                      ctx.now, meet.estimate,
                                      meet.assumed_m_avg));
}

}  // namespace

std::optional<StraitPolicy::GpuChoice> StraitPolicy::BestGpu(
    const std::vector<GpuRuntimeState>& gpus, const Candidate& candidate,
    const InterferencePredictor& predictor, Timestamp now) const {
  std::optional<GpuChoice> best;
  for (const auto& g : gpus) {
    if (!g.HasFreeSlot()) continue;
    if (options_.violate_and_aimd &&
        CheckViolate(g, candidate, predictor, now)) {
      continue;
    }
    MeetResult meet = CheckMeet(g, candidate, predictor, now);
    if (options_.meet_check && !meet.meets) continue;
    if (!best || meet.estimate.total < best->meet.estimate.total) {
      best = GpuChoice{g.gpu_id, std::move(meet)};
    }
  }
  return best;
}

PassResult StraitPolicy::Schedule(SchedulingContext& ctx) {
  PassResult result;
  for (std::size_t qi : ScanOrder(ctx.queues, options_.priority_scan)) {
    TaskQueue& q = ctx.queues[qi];
    AppendDropped(result, EarlyDrop(q, ctx.now));
    while (q.Ready(ctx.now)) {
      const int bs = LargestFeasible(MaxBatch(q), [&](int k) {
        return BestGpu(ctx.gpus, MakeCandidate(q, k), ctx.predictor, ctx.now)
            .has_value();
      });
      if (bs == 0) break;  // defer this queue
      const auto choice =
          BestGpu(ctx.gpus, MakeCandidate(q, bs), ctx.predictor, ctx.now);
      GpuRuntimeState& gpu = GpuById(ctx.gpus, choice->gpu);
      result.decisions.push_back(Dispatch(q, gpu, bs, ctx.next_batch_id++,
                                          ctx.now, choice->meet.estimate,
                                          choice->meet.assumed_m_avg));
    }
  }
  return result;
}

void StraitPolicy::OnHpViolation(std::vector<GpuRuntimeState>& gpus, GpuId gpu,
                                 Timestamp) {
  if (!options_.violate_and_aimd) return;
  for (auto& g : gpus) {
    if (gpu < 0 || g.gpu_id == gpu) g.aimd = AimdOnHpViolation(g.aimd);
  }
}

void StraitPolicy::OnTick(std::vector<GpuRuntimeState>& gpus, Timestamp now) {
  if (!options_.violate_and_aimd) return;
  for (auto& g : gpus) g.aimd = AimdTick(g.aimd, now);
}

PassResult TemporalPolicy::Schedule(SchedulingContext& ctx) {
  PassResult result;
  for (std::size_t qi : ScanOrder(ctx.queues, true)) {
    TaskQueue& q = ctx.queues[qi];
    AppendDropped(result, EarlyDrop(q, ctx.now));
    while (q.Ready(ctx.now)) {
      // Idle GPU whose link frees up first.
      GpuRuntimeState* target = nullptr;
      for (auto& g : ctx.gpus) {
        if (!g.running.empty()) continue;
        if (target == nullptr ||
            g.pcie.EstimateUpstreamDelay(ctx.now) <
                target->pcie.EstimateUpstreamDelay(ctx.now)) {
          target = &g;
        }
      }
      if (target == nullptr) break;
      const Millis data = target->pcie.EstimateUpstreamDelay(ctx.now);
      const int bs = LargestFeasible(MaxBatch(q), [&](int k) {
        return ctx.now + data + q.profile->InfIsol(k) <=
               q.pending.front().deadline_abs;
      });
      if (bs == 0) break;
      const Candidate cand = MakeCandidate(q, bs);
      // Nothing else runs on the GPU, so the estimate sees no co-location.
      const MeetResult meet = CheckMeet(*target, cand, ctx.predictor, ctx.now);
      result.decisions.push_back(Dispatch(q, *target, bs, ctx.next_batch_id++,
                                          ctx.now, meet.estimate,
                                          meet.assumed_m_avg));
    }
  }
  return result;
}

PassResult StaticSpatialPolicy::Schedule(SchedulingContext& ctx) {
  PassResult result;
  for (std::size_t qi : ScanOrder(ctx.queues, true)) {
    TaskQueue& q = ctx.queues[qi];
    AppendDropped(result, EarlyDrop(q, ctx.now));
    while (q.Ready(ctx.now)) {
      const GpuId gpu = LeastLoaded(ctx.gpus, [&](const GpuRuntimeState& g) {
        return g.HasFreeSlot() && static_cast<int>(g.running.size()) < cap_;
      });
      if (gpu < 0) break;
      DispatchFixedSize(ctx, q, gpu, result);
    }
  }
  return result;
}

PassResult ReactiveSpatialPolicy::Schedule(SchedulingContext& ctx) {
  PassResult result;
  for (std::size_t qi : ScanOrder(ctx.queues, true)) {
    TaskQueue& q = ctx.queues[qi];
    AppendDropped(result, EarlyDrop(q, ctx.now));
    const Priority p = q.priority();
    const int class_limit =
        p == Priority::kHigh ? state_.hp_limit : state_.lp_allowance;
    while (q.Ready(ctx.now)) {
      const GpuId gpu = LeastLoaded(ctx.gpus, [&](const GpuRuntimeState& g) {
        return static_cast<int>(g.running.size()) < state_.global_limit &&
               g.HasFreeSlot() && g.CountRunning(p) < class_limit;
      });
      if (gpu < 0) break;
      DispatchFixedSize(ctx, q, gpu, result);
    }
  }
  return result;
}

void ReactiveSpatialPolicy::OnHpViolation(std::vector<GpuRuntimeState>&, GpuId,
                                          Timestamp) {
  state_.lp_allowance = std::max(state_.min_allowance, state_.lp_allowance - 1);
}

void ReactiveSpatialPolicy::OnTick(std::vector<GpuRuntimeState>&,
                                   Timestamp now) {
  if (now - state_.last_reset >= state_.reset_period) {
    const double periods =
        std::floor((now - state_.last_reset) / state_.reset_period);
    state_.last_reset += periods * state_.reset_period;
    state_.lp_allowance = state_.default_allowance;
  }
}

std::unique_ptr<SchedulingPolicy> MakePolicy(PolicyKind kind,
                                             StraitOptions options) {
  switch (kind) {
    case PolicyKind::kStrait: return std::make_unique<StraitPolicy>(options);
    case PolicyKind::kTemporal: return std::make_unique<TemporalPolicy>();
    case PolicyKind::kStaticSpatial: return std::make_unique<StaticSpatialPolicy>();
    case PolicyKind::kReactiveSpatial:
      return std::make_unique<ReactiveSpatialPolicy>();
  }
  throw std::invalid_argument("unknown policy kind");
}

}  // namespace strait
