#include "strait/scheduler.h"

#include <algorithm>
#include <cmath>

namespace strait {

bool TaskQueue::Ready(Timestamp now) const {
  if (pending.empty()) return false;
  return static_cast<int>(pending.size()) >= profile->max_batch_size ||
         now >= TimeoutDeadline();
}

AimdState AimdTick(AimdState state, Timestamp now) {
  if (now < state.last_tick) return state;
  const auto ticks = static_cast<std::int64_t>(
      std::floor((now - state.last_tick) / state.tick));
  if (ticks <= 0) return state;
  state.c_low = std::min(state.ceiling,
                         state.c_low + state.increase * static_cast<double>(ticks));
  state.last_tick += state.tick * static_cast<double>(ticks);
  return state;
}

AimdState AimdOnHpViolation(AimdState state) {
  state.c_low = state.floor;
  return state;
}

int GpuRuntimeState::CountRunning(Priority p) const {
  return static_cast<int>(
      std::count_if(running.begin(), running.end(), [p](const auto& e) {
        return e.batch.priority == p;
      }));
}

RunningTaskEntry* GpuRuntimeState::Find(BatchId id) {
  auto it = std::find_if(running.begin(), running.end(),
                         [id](const auto& e) { return e.batch.batch_id == id; });
  return it == running.end() ? nullptr : &*it;
}

const RunningTaskEntry* GpuRuntimeState::Find(BatchId id) const {
  return const_cast<GpuRuntimeState*>(this)->Find(id);
}

void GpuRuntimeState::RecomputeAggregate() {
  std::fill(aggregate_throughput.begin(), aggregate_throughput.end(), 0.0);
  for (const auto& e : running) AddInPlace(aggregate_throughput, e.throughput);
}

Metrics GpuRuntimeState::AggregateExcluding(BatchId exclude) const {
  Metrics sum(metric_count(), 0.0);
  for (const auto& e : running) {
    if (e.batch.batch_id != exclude) AddInPlace(sum, e.throughput);
  }
  return sum;
}

Metrics GpuRuntimeState::KernelResidentExcluding(BatchId exclude) const {
  Metrics sum(metric_count(), 0.0);
  for (const auto& e : running) {
    if (e.kernel_started && e.batch.batch_id != exclude) {
      AddInPlace(sum, e.throughput);
    }
  }
  return sum;
}

Metrics GpuRuntimeState::LowPriorityAggregate() const {
  Metrics sum(metric_count(), 0.0);
  for (const auto& e : running) {
    if (e.batch.priority == Priority::kLow) AddInPlace(sum, e.throughput);
  }
  return sum;
}

Candidate MakeCandidate(const TaskQueue& queue, int size) {
  Candidate c;
  c.profile = queue.profile;
  c.size = size;
  c.front_enqueue = queue.pending.front().arrival_time;
  c.deadline_abs = queue.pending.front().deadline_abs;
  return c;
}

std::vector<Request> EarlyDrop(TaskQueue& queue, Timestamp now) {
  std::vector<Request> dropped;
  if (queue.pending.empty()) return dropped;
  const Millis floor = queue.profile->InfIsol(1);
  std::deque<Request> kept;
  for (auto& r : queue.pending) {
    if (r.deadline_abs - now < floor) {
      dropped.push_back(std::move(r));
    } else {
      kept.push_back(std::move(r));
    }
  }
  queue.pending = std::move(kept);
  return dropped;
}

double CurrentInterference(const RunningTaskEntry& entry, Timestamp now,
                           const InterferencePredictor& predictor) {
  const int size = entry.batch.size;
  Metrics observed;
  if (entry.timeline.empty()) {
    observed.assign(predictor.params().w.size(), 0.0);
  } else if (entry.kernel_started && now > entry.batch.kernel_start) {
    observed = entry.timeline.TimeWeightedAverage(entry.batch.kernel_start, now);
  } else {
    observed = entry.timeline.samples().back().value;
  }
  return predictor.Predict(observed, entry.profile->SelfCmp(size),
                           entry.profile->SelfMem(size), entry.batch.priority);
}

Timestamp ProjectCompletion(const RunningTaskEntry& entry, double intf_current,
                            double intf_new, Timestamp now) {
  const int size = entry.batch.size;
  const Millis kernel = entry.profile->KernelIsol(size);
  const Timestamp start = entry.kernel_started ? entry.batch.kernel_start
                                               : entry.kernel_start_estimate;
  Timestamp kernel_end;
  if (now <= start) {
    kernel_end = start + kernel * intf_new;
  } else {
    const double done = std::min(1.0, (now - start) / (intf_current * kernel));
    kernel_end = now + (1.0 - done) * kernel * intf_new;
  }
  return kernel_end + entry.profile->ResidualIsol(size);
}

bool CheckViolate(const GpuRuntimeState& gpu, const Candidate& candidate,
                  const InterferencePredictor& predictor, Timestamp now) {
  const Metrics& demand = candidate.throughput();
  if (candidate.priority() == Priority::kLow) {
    Metrics lp = gpu.LowPriorityAggregate();
    AddInPlace(lp, demand);
    const double cap = gpu.aimd.c_low / 100.0;
    for (double x : lp) {
      if (x > cap) return true;
    }
  }
  for (const auto& e : gpu.running) {
    if (!AtLeast(e.batch.priority, candidate.priority())) continue;
    const int size = e.batch.size;
    const double self_cmp = e.profile->SelfCmp(size);
    const double self_mem = e.profile->SelfMem(size);
    const double intf_current = CurrentInterference(e, now, predictor);
    Metrics others = gpu.AggregateExcluding(e.batch.batch_id);
    const double intf_without =
        predictor.Predict(others, self_cmp, self_mem, e.batch.priority);
    AddInPlace(others, demand);
    const double intf_with =
        predictor.Predict(others, self_cmp, self_mem, e.batch.priority);
    const bool meets_without =
        ProjectCompletion(e, intf_current, intf_without, now) <= e.deadline_abs;
    const bool meets_with =
        ProjectCompletion(e, intf_current, intf_with, now) <= e.deadline_abs;
    if (meets_without && !meets_with) return true;
  }
  return false;
}

MeetResult CheckMeet(const GpuRuntimeState& gpu, const Candidate& candidate,
                     const InterferencePredictor& predictor, Timestamp now) {
  MeetResult r;
  r.assumed_m_avg = Scaled(gpu.aggregate_throughput, 0.5);
  r.estimate = EstimateLatency(*candidate.profile, candidate.size,
                               candidate.front_enqueue, gpu.pcie, now,
                               r.assumed_m_avg, predictor.params(),
                               predictor.kernel_effect_cap());
  // The estimate already counts time spent queued since front_enqueue.
  r.meets = candidate.front_enqueue + r.estimate.total <= candidate.deadline_abs;
  return r;
}

int LargestFeasible(int max_k, const std::function<bool(int)>& feasible) {
  int lo = 1;
  int hi = max_k;
  int best = 0;
  while (lo <= hi) {
    const int mid = lo + (hi - lo) / 2;
    if (feasible(mid)) {
      best = mid;
      lo = mid + 1;
    } else {
      hi = mid - 1;
    }
  }
  return best;
}

ScheduleDecision Dispatch(TaskQueue& queue, GpuRuntimeState& gpu, int size,
                          BatchId batch_id, Timestamp now,
                          const LatencyEstimate& estimate,
                          const Metrics& assumed_m_avg) {
  const ModelProfile& profile = *queue.profile;
  RunningTaskEntry entry;
  entry.profile = &profile;
  entry.batch.batch_id = batch_id;
  entry.batch.model_id = profile.model_id;
  entry.batch.size = size;
  entry.batch.priority = profile.priority;
  entry.batch.gpu_id = gpu.gpu_id;
  entry.batch.sched_time = now;
  entry.batch.requests.assign(queue.pending.begin(),
                              queue.pending.begin() + size);
  queue.pending.erase(queue.pending.begin(), queue.pending.begin() + size);
  entry.batch.front_enqueue_time = entry.batch.requests.front().arrival_time;
  for (const auto& r : entry.batch.requests) {
    entry.batch.front_enqueue_time =
        std::min(entry.batch.front_enqueue_time, r.arrival_time);
  }
  entry.deadline_abs = entry.batch.BindingDeadline();
  entry.throughput = profile.Throughput(size);
  entry.intf_predicted = estimate.intf;

  const auto reservation = gpu.pcie.Reserve(now, profile.HtodIsol(size));
  entry.reservation = reservation.id;
  entry.kernel_start_estimate = reservation.predicted_end;
  entry.timeline.Record(now, gpu.KernelResidentExcluding(batch_id));

  ScheduleDecision d;
  d.time = now;
  d.batch_id = batch_id;
  d.model_id = profile.model_id;
  d.priority = profile.priority;
  d.size = size;
  d.gpu_id = gpu.gpu_id;
  d.estimated_latency = estimate.total;
  d.intf_predicted = estimate.intf;
  d.assumed_m_avg = assumed_m_avg;

  gpu.running.push_back(std::move(entry));
  gpu.RecomputeAggregate();
  return d;
}

void OnKernelStart(GpuRuntimeState& gpu, BatchId batch_id, Timestamp now) {
  RunningTaskEntry* entry = gpu.Find(batch_id);
  if (entry == nullptr) {
    throw SimulationError("kernel start for unknown batch " +
                          std::to_string(batch_id));
  }
  entry->kernel_started = true;
  entry->batch.kernel_start = now;
  entry->kernel_start_estimate = now;
  for (auto& e : gpu.running) {
    e.timeline.Record(now, gpu.KernelResidentExcluding(e.batch.batch_id));
  }
}

CompletionOutcome OnBatchComplete(GpuRuntimeState& gpu, BatchId batch_id,
                                  Millis measured_kernel, Timestamp now,
                                  InterferencePredictor& predictor) {
  auto it = std::find_if(gpu.running.begin(), gpu.running.end(),
                         [batch_id](const auto& e) {
                           return e.batch.batch_id == batch_id;
                         });
  if (it == gpu.running.end()) {
    throw SimulationError("completion for unknown batch " +
                          std::to_string(batch_id));
  }
  CompletionOutcome out;
  out.entry = std::move(*it);
  gpu.running.erase(it);
  gpu.RecomputeAggregate();
  for (auto& e : gpu.running) {
    e.timeline.Record(now, gpu.KernelResidentExcluding(e.batch.batch_id));
  }

  RunningTaskEntry& done = out.entry;
  const int size = done.batch.size;
  const ModelProfile& profile = *done.profile;
  FeedbackSample& s = out.sample;
  s.batch_id = batch_id;
  s.m_avg_twa = done.timeline.TimeWeightedAverage(done.batch.kernel_start, now);
  s.m_self_cmp = profile.SelfCmp(size);
  s.m_self_mem = profile.SelfMem(size);
  s.priority = done.batch.priority;
  s.intf_predicted = done.intf_predicted;
  s.intf_actual = measured_kernel / profile.KernelIsol(size);
  out.update = predictor.Update(s);

  out.completion_time = now + profile.ResidualIsol(size);
  done.batch.completion_time = out.completion_time;
  for (const auto& r : done.batch.requests) {
    if (out.completion_time > r.deadline_abs) out.late_requests.push_back(r.request_id);
  }
  out.hp_violation =
      done.batch.priority == Priority::kHigh && !out.late_requests.empty();
  return out;
}

}  // namespace strait
