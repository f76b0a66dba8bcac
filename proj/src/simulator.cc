#include "strait/simulator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace strait {

namespace {

constexpr Millis kTickPeriod = 100.0;

}  // namespace

bool SimEventLater::operator()(const SimEvent& a, const SimEvent& b) const {
  if (a.time != b.time) return a.time > b.time;
  if (a.kind != b.kind) return a.kind > b.kind;
  return a.seq > b.seq;
}

void SimConfig::Validate() const {
  if (profiles.empty()) throw std::invalid_argument("config: no profiles");
  if (num_gpus < 1) throw std::invalid_argument("config: need at least one GPU");
  if (concurrency_limit < 1) {
    throw std::invalid_argument("config: concurrency limit must be >= 1");
  }
  if (!(duration >= 0)) throw std::invalid_argument("config: negative duration");
  const std::size_t metrics = profiles.begin()->second.m_metric.at(0).size();
  for (const auto& [id, p] : profiles) {
    auto v = ValidateProfile(p, metrics);
    if (!v.empty()) throw ProfileInvalidError(id, std::move(v));
  }
  for (const auto& [id, p] : true_profiles) {
    auto it = profiles.find(id);
    if (it == profiles.end() || it->second.max_batch_size != p.max_batch_size) {
      throw std::invalid_argument("config: true profile mismatch for " + id);
    }
  }
  ground_truth.Validate();
  if (ground_truth.w.size() != metrics) {
    throw std::invalid_argument("config: ground truth metric count mismatch");
  }
  if (shift) {
    shift->params.Validate();
    if (shift->params.w.size() != metrics) {
      throw std::invalid_argument("config: shifted ground truth metric count");
    }
  }
  Timestamp prev = 0;
  for (const auto& a : arrivals) {
    if (!profiles.count(a.model_id)) {
      throw std::invalid_argument("config: arrival for unknown model " + a.model_id);
    }
    if (a.time < prev || a.time < 0) {
      throw std::invalid_argument("config: arrivals must be sorted and >= 0");
    }
    prev = a.time;
  }
  if (initial_predictor && initial_predictor->params().w.size() != metrics) {
    throw std::invalid_argument("config: predictor metric count mismatch");
  }
}

Simulator::Simulator(SimConfig config)
    : cfg_(std::move(config)),
      predictor_(kDefaultMetricCount),
      rng_(DeriveSeed(cfg_.seed, 0x5117)) {
  cfg_.Validate();
  true_profiles_ = cfg_.true_profiles.empty() ? &cfg_.profiles : &cfg_.true_profiles;
  const std::size_t metrics = cfg_.profiles.begin()->second.m_metric.at(0).size();
  predictor_ = cfg_.initial_predictor ? *cfg_.initial_predictor
                                      : InterferencePredictor(metrics);
  policy_ = MakePolicy(cfg_.policy, cfg_.strait_options);
  for (GpuId g = 0; g < cfg_.num_gpus; ++g) {
    gpus_.emplace_back(g, metrics, cfg_.concurrency_limit);
  }
  for (const auto& [id, p] : cfg_.profiles) {
    TaskQueue q;
    q.profile = &p;
    queues_.push_back(std::move(q));
  }
  link_free_.assign(gpus_.size(), 0.0);
  last_clow_.assign(gpus_.size(), std::numeric_limits<double>::quiet_NaN());
  truth_ = &cfg_.ground_truth;
}

void Simulator::Push(Timestamp t, EventKind kind, std::int64_t id,
                     std::uint64_t version) {
  events_.push(SimEvent{t, kind, seq_++, id, version});
}

TaskQueue& Simulator::QueueFor(const std::string& model_id) {
  for (auto& q : queues_) {
    if (q.model_id() == model_id) return q;
  }
  throw SimulationError("no queue for " + model_id);
}

bool Simulator::Busy() const {
  if (!exec_.empty()) return true;
  return std::any_of(queues_.begin(), queues_.end(),
                     [](const TaskQueue& q) { return !q.empty(); });
}

void Simulator::AdvanceGpu(GpuId gpu, Timestamp now) {
  for (auto& [id, ex] : exec_) {
    if (ex.gpu != gpu || !ex.resident) continue;
    const double consumed = (now - ex.last_update) / ex.slowdown;
    if (consumed < 0) throw SimulationError("progress time regression");
    ex.remaining_work -= consumed;
    ex.work_integral += consumed;
    ex.last_update = now;
    const Millis total = ex.true_profile->KernelIsol(ex.size);
    if (ex.remaining_work < -1e-9 * total) {
      throw SimulationError("negative remaining work for batch " +
                            std::to_string(id));
    }
    ex.remaining_work = std::max(0.0, ex.remaining_work);
  }
}

void Simulator::RescheduleGpu(GpuId gpu, Timestamp now) {
  const std::size_t metrics = gpus_.front().metric_count();
  for (auto& [id, ex] : exec_) {
    if (ex.gpu != gpu || !ex.resident) continue;
    Metrics colocated(metrics, 0.0);
    for (const auto& [other_id, other] : exec_) {
      if (other_id == id || other.gpu != gpu || !other.resident) continue;
      AddInPlace(colocated, other.true_profile->Throughput(other.size));
    }
    const Priority gamma_class = cfg_.stream_priority ? ex.priority : Priority::kLow;
    ex.slowdown = GroundTruthSlowdown(colocated, ex.true_profile->SelfCmp(ex.size),
                                      ex.true_profile->SelfMem(ex.size),
                                      gamma_class, Truth(), ex.noise);
    ex.last_update = now;
    ex.version += 1;
    Push(now + ex.remaining_work * ex.slowdown, EventKind::kKernelComplete, id,
         ex.version);
  }
}

void Simulator::RecordCLow(Timestamp now) {
  for (const auto& g : gpus_) {
    double& last = last_clow_[static_cast<std::size_t>(g.gpu_id)];
    if (g.aimd.c_low == last) continue;
    last = g.aimd.c_low;
    TraceEvent e;
    e.time = now;
    e.kind = TraceKind::kCLow;
    e.gpu = g.gpu_id;
    e.v[0] = g.aimd.c_low;
    trace_.events.push_back(std::move(e));
  }
}

void Simulator::MaybeShift(Timestamp now) {
  if (!cfg_.shift || shifted_ || now < cfg_.shift->at) return;
  const Timestamp at = cfg_.shift->at;
  for (const auto& g : gpus_) AdvanceGpu(g.gpu_id, at);
  truth_ = &cfg_.shift->params;
  for (const auto& g : gpus_) RescheduleGpu(g.gpu_id, at);
  if (cfg_.track_frozen_predictor) {
    frozen_ = predictor_;
    frozen_->set_frozen(true);
  }
  shifted_ = true;
}

void Simulator::StartBatch(const ScheduleDecision& d, Timestamp now) {
  const ModelProfile& truth = true_profiles_->at(d.model_id);
  const auto g = static_cast<std::size_t>(d.gpu_id);
  const Millis htod =
      truth.HtodIsol(d.size) * DrawLogNormal(rng_, Truth().htod_noise_sigma);
  const Timestamp start = std::max(now, link_free_[g]);
  const Timestamp end = start + htod;
  link_free_[g] = end;

  ExecutionState ex;
  ex.batch_id = d.batch_id;
  ex.gpu = d.gpu_id;
  ex.true_profile = &truth;
  ex.size = d.size;
  ex.priority = d.priority;
  ex.noise = DrawLogNormal(rng_, Truth().noise_sigma);
  ex.remaining_work = truth.KernelIsol(d.size);
  exec_.emplace(d.batch_id, ex);
  gpus_[g].Find(d.batch_id)->batch.transfer_start = start;

  TraceEvent e;
  e.time = start;
  e.kind = TraceKind::kTransferStart;
  e.gpu = d.gpu_id;
  e.batch = d.batch_id;
  e.model = d.model_id;
  e.priority = d.priority;
  e.size = d.size;
  e.v[0] = end;
  trace_.events.push_back(std::move(e));
  Push(end, EventKind::kTransferComplete, d.batch_id);
}

void Simulator::RunPass(Timestamp now) {
  SchedulingContext ctx{queues_, gpus_, predictor_, now, next_batch_id_};
  PassResult result = policy_->Schedule(ctx);
  bool hp_dropped = false;
  for (const auto& r : result.dropped) {
    const ModelProfile& p = cfg_.profiles.at(r.model_id);
    TraceEvent e;
    e.time = now;
    e.kind = TraceKind::kDrop;
    e.request = r.request_id;
    e.model = r.model_id;
    e.priority = p.priority;
    e.v[0] = r.deadline_abs;
    trace_.events.push_back(std::move(e));
    hp_dropped |= p.priority == Priority::kHigh;
  }
  if (hp_dropped) {
    policy_->OnHpViolation(gpus_, -1, now);
    RecordCLow(now);
  }
  for (const auto& d : result.decisions) {
    TraceEvent e;
    e.time = now;
    e.kind = TraceKind::kSchedule;
    e.gpu = d.gpu_id;
    e.batch = d.batch_id;
    e.model = d.model_id;
    e.priority = d.priority;
    e.size = d.size;
    e.v[0] = d.estimated_latency;
    e.v[1] = d.intf_predicted;
    trace_.events.push_back(std::move(e));
    estimates_[d.batch_id].total = d.estimated_latency;
    StartBatch(d, now);
  }
}

void Simulator::HandleArrival(const SimEvent& ev) {
  const Arrival& a = cfg_.arrivals[static_cast<std::size_t>(ev.id)];
  TaskQueue& q = QueueFor(a.model_id);
  Request r;
  r.request_id = ev.id;
  r.model_id = a.model_id;
  r.arrival_time = ev.time;
  r.deadline_abs = ev.time + q.profile->deadline;
  q.pending.push_back(r);

  TraceEvent e;
  e.time = ev.time;
  e.kind = TraceKind::kArrival;
  e.request = r.request_id;
  e.model = r.model_id;
  e.priority = q.priority();
  e.v[0] = r.deadline_abs;
  trace_.events.push_back(std::move(e));

  if (q.Ready(ev.time)) {
    RunPass(ev.time);
  } else {
    Push(ev.time + q.profile->batch_timeout, EventKind::kBatchTimeout, ev.id);
  }
}

void Simulator::HandleTransferComplete(const SimEvent& ev) {
  ExecutionState& ex = exec_.at(ev.id);
  GpuRuntimeState& gpu = gpus_[static_cast<std::size_t>(ex.gpu)];
  RunningTaskEntry* entry = gpu.Find(ev.id);
  if (entry == nullptr) throw SimulationError("transfer for unknown batch");
  gpu.pcie.Calibrate(entry->reservation, ev.time);

  TraceEvent e;
  e.time = ev.time;
  e.kind = TraceKind::kTransferEnd;
  e.gpu = ex.gpu;
  e.batch = ev.id;
  e.model = entry->batch.model_id;
  e.priority = ex.priority;
  e.size = ex.size;
  trace_.events.push_back(e);

  AdvanceGpu(ex.gpu, ev.time);
  ex.resident = true;
  ex.kernel_start = ev.time;
  ex.last_update = ev.time;
  OnKernelStart(gpu, ev.id, ev.time);
  RescheduleGpu(ex.gpu, ev.time);

  e.kind = TraceKind::kKernelStart;
  trace_.events.push_back(std::move(e));
}

void Simulator::HandleKernelComplete(const SimEvent& ev) {
  auto it = exec_.find(ev.id);
  if (it == exec_.end() || it->second.version != ev.version) return;  // stale
  const GpuId g = it->second.gpu;
  AdvanceGpu(g, ev.time);
  ExecutionState ex = it->second;
  exec_.erase(it);
  RescheduleGpu(g, ev.time);

  const Millis measured = ev.time - ex.kernel_start;
  const Millis isolated = ex.true_profile->KernelIsol(ex.size);
  TraceEvent ke;
  ke.time = ev.time;
  ke.kind = TraceKind::kKernelEnd;
  ke.gpu = g;
  ke.batch = ev.id;
  ke.model = ex.true_profile->model_id;
  ke.priority = ex.priority;
  ke.size = ex.size;
  ke.v = {measured, isolated, ex.work_integral, measured / isolated, 0, 0};
  trace_.events.push_back(ke);

  GpuRuntimeState& gpu = gpus_[static_cast<std::size_t>(g)];
  CompletionOutcome out = OnBatchComplete(gpu, ev.id, measured, ev.time, predictor_);

  TraceEvent fb = ke;
  fb.kind = TraceKind::kFeedback;
  fb.v[0] = out.sample.intf_predicted;
  fb.v[1] = out.update.prediction_before;
  fb.v[2] = out.sample.intf_actual;
  fb.v[3] = frozen_ ? frozen_->Predict(out.sample.m_avg_twa, out.sample.m_self_cmp,
                                       out.sample.m_self_mem, out.sample.priority)
                    : std::numeric_limits<double>::quiet_NaN();
  fb.v[4] = estimates_[ev.id].total;
  fb.v[5] = out.completion_time - out.entry.batch.front_enqueue_time;
  trace_.events.push_back(std::move(fb));
  estimates_.erase(ev.id);

  for (const auto& r : out.entry.batch.requests) {
    TraceEvent c;
    c.time = out.completion_time;
    c.kind = TraceKind::kComplete;
    c.gpu = g;
    c.batch = ev.id;
    c.request = r.request_id;
    c.model = r.model_id;
    c.priority = ex.priority;
    c.size = ex.size;
    c.v[0] = out.completion_time - r.arrival_time;
    c.v[1] = r.deadline_abs;
    trace_.events.push_back(std::move(c));
  }
  if (out.hp_violation) {
    policy_->OnHpViolation(gpus_, g, ev.time);
    RecordCLow(ev.time);
  }
  RunPass(ev.time);
}

void Simulator::HandleTick(const SimEvent& ev) {
  policy_->OnTick(gpus_, ev.time);
  RecordCLow(ev.time);
  RunPass(ev.time);
  const std::int64_t next = ev.id + 1;
  const Timestamp t = static_cast<double>(next) * kTickPeriod;
  if (t < cfg_.duration || Busy()) Push(t, EventKind::kAimdTick, next);
}

SimResult Simulator::Run() {
  for (std::size_t i = 0; i < cfg_.arrivals.size(); ++i) {
    if (cfg_.arrivals[i].time >= cfg_.duration) break;
    Push(cfg_.arrivals[i].time, EventKind::kRequestArrival,
         static_cast<std::int64_t>(i));
  }
  // Nothing to serve: no control ticks either.
  if (events_.empty()) return SimResult{std::move(trace_), predictor_, gpus_};
  RecordCLow(0.0);
  Push(kTickPeriod, EventKind::kAimdTick, 1);

  const Timestamp stop = cfg_.duration + cfg_.drain_limit;
  while (!events_.empty()) {
    const SimEvent ev = events_.top();
    if (ev.time > stop) {
      trace_.truncated = true;
      break;
    }
    events_.pop();
    MaybeShift(ev.time);
    switch (ev.kind) {
      case EventKind::kRequestArrival: HandleArrival(ev); break;
      case EventKind::kBatchTimeout: RunPass(ev.time); break;
      case EventKind::kTransferComplete: HandleTransferComplete(ev); break;
      case EventKind::kKernelComplete: HandleKernelComplete(ev); break;
      case EventKind::kAimdTick: HandleTick(ev); break;
    }
  }
  return SimResult{std::move(trace_), predictor_, gpus_};
}

SimResult RunSimulation(SimConfig config) {
  Simulator sim(std::move(config));
  return sim.Run();
}

}  // namespace strait
