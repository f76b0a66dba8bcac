#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "strait/policies.h"
#include "strait/scheduler.h"
#include "test_util.h"

using namespace strait;
using strait::testing::LinearProfile;

namespace {

TaskQueue QueueWith(const ModelProfile& p, std::vector<Timestamp> arrivals) {
  TaskQueue q;
  q.profile = &p;
  RequestId id = 0;
  for (Timestamp t : arrivals) {
    q.pending.push_back({id++, p.model_id, t, t + p.deadline});
  }
  return q;
}

// Prediction depends only on metric 0 of the co-location: an empty GPU
// predicts no interference, a full unit of metric 0 predicts intf 2.
InterferencePredictor UnitPredictor() {
  PredictorParams p = PredictorParams::Initial();
  p.w = {1, 0, 0, 0, 0};
  p.w_cmp = p.w_mem = 0;
  p.k = 1;
  p.b = 2;
  p.c = -1;
  p.coeff = {1.0, 1.0};
  InterferencePredictor pred;
  pred.set_params(p);
  return pred;
}

InterferencePredictor ClampedPredictor() {
  PredictorParams p = PredictorParams::Initial();
  p.c = -100;
  InterferencePredictor pred;
  pred.set_params(p);
  return pred;
}

RunningTaskEntry RunningEntry(const ModelProfile& p, BatchId id, int size,
                              Timestamp kernel_start, Timestamp deadline) {
  RunningTaskEntry e;
  e.profile = &p;
  e.batch.batch_id = id;
  e.batch.model_id = p.model_id;
  e.batch.size = size;
  e.batch.priority = p.priority;
  e.batch.kernel_start = kernel_start;
  e.batch.requests.push_back({id, p.model_id, 0, deadline});
  e.kernel_started = true;
  e.kernel_start_estimate = kernel_start;
  e.deadline_abs = deadline;
  e.throughput = p.Throughput(size);
  e.timeline.Record(kernel_start, Metrics(kDefaultMetricCount, 0.0));
  return e;
}

}  // namespace

TEST_CASE("queue readiness") {
  const ModelProfile p = LinearProfile("m", Priority::kHigh, 20, 1.0, 0.5, 0.5, 4,
                                       0.2, 2.0);
  TaskQueue q = QueueWith(p, {0, 0.5});
  CHECK_FALSE(q.Ready(1.9));
  CHECK(q.Ready(2.0));
  TaskQueue full = QueueWith(p, {0, 0.1, 0.2, 0.3});
  CHECK(full.Ready(0.3));
  TaskQueue empty = QueueWith(p, {});
  CHECK_FALSE(empty.Ready(100));
}

TEST_CASE("early drop") {
  const ModelProfile p = LinearProfile("m", Priority::kHigh, 10, 1.5, 1.0, 0.5);
  CHECK(p.InfIsol(1) == 3.0);
  TaskQueue empty = QueueWith(p, {});
  CHECK(EarlyDrop(empty, 5).empty());

  TaskQueue one = QueueWith(p, {0});
  CHECK(EarlyDrop(one, 8).size() == 1);  // 2 ms left, 3 needed
  CHECK(one.pending.empty());

  TaskQueue five = QueueWith(p, {5, 6, 7, 8, 9});
  five.pending[2].deadline_abs = 11.0;  // only this one is infeasible at t=9
  const auto dropped = EarlyDrop(five, 9);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0].request_id == 2);
  REQUIRE(five.pending.size() == 4);
  CHECK(five.pending[0].request_id == 0);
  CHECK(five.pending[1].request_id == 1);
  CHECK(five.pending[2].request_id == 3);
  CHECK(five.pending[3].request_id == 4);
}

TEST_CASE("AIMD increase and reset") {
  AimdState s;
  CHECK(AimdTick(s, 1000).c_low == 77.5);
  CHECK(AimdTick(s, 50).c_low == 75.0);
  AimdState near;
  near.c_low = 99.9;
  CHECK(AimdTick(near, 100).c_low == 100.0);
  AimdState high;
  high.c_low = 93;
  CHECK(AimdOnHpViolation(high).c_low == 75);
  CHECK(AimdOnHpViolation(s).c_low == 75);
  CHECK(AimdOnHpViolation(AimdOnHpViolation(high)).c_low == 75);

  // Ticks delivered one at a time agree with a single late tick.
  AimdState step;
  for (int t = 1; t <= 10; ++t) step = AimdTick(step, 100.0 * t);
  CHECK(step.c_low == 77.5);
}

TEST_CASE("binary search equals linear scan for every monotone predicate") {
  for (int max_k = 1; max_k <= 8; ++max_k) {
    int monotone = 0;
    for (unsigned mask = 0; mask < (1u << max_k); ++mask) {
      auto feasible = [mask](int k) { return (mask >> (k - 1)) & 1u; };
      bool is_monotone = true;
      for (int k = 2; k <= max_k; ++k) {
        if (feasible(k) && !feasible(k - 1)) is_monotone = false;
      }
      if (!is_monotone) continue;
      ++monotone;
      int linear = 0;
      for (int k = 1; k <= max_k; ++k) {
        if (feasible(k)) linear = k;
      }
      CHECK(LargestFeasible(max_k, feasible) == linear);
    }
    CHECK(monotone == max_k + 1);
  }
  CHECK(LargestFeasible(8, [](int k) { return k <= 3; }) == 3);
}

TEST_CASE("check_violate") {
  const InterferencePredictor pred = UnitPredictor();
  GpuRuntimeState empty(0, kDefaultMetricCount);
  const ModelProfile hp = LinearProfile("hp", Priority::kHigh, 40, 8.0, 0.5, 0.5, 1,
                                        1.0);
  TaskQueue q = QueueWith(hp, {0});
  CHECK_FALSE(CheckViolate(empty, MakeCandidate(q, 1), pred, 0));

  SUBCASE("low-priority cap") {
    const ModelProfile lp_run = LinearProfile("a", Priority::kLow, 40, 1.0, 0.5, 0.5,
                                              1, 0.5);
    const ModelProfile lp_new = LinearProfile("b", Priority::kLow, 40, 1.0, 0.5, 0.5,
                                              1, 0.4);
    GpuRuntimeState g(0, kDefaultMetricCount);
    g.aimd.c_low = 80;
    g.running.push_back(RunningEntry(lp_run, 1, 1, 0, 1000));
    g.RecomputeAggregate();
    TaskQueue lq = QueueWith(lp_new, {0});
    CHECK(CheckViolate(g, MakeCandidate(lq, 1), ClampedPredictor(), 0));
    g.aimd.c_low = 95;
    CHECK_FALSE(CheckViolate(g, MakeCandidate(lq, 1), ClampedPredictor(), 0));
  }

  SUBCASE("running batch pushed past its deadline") {
    // Kernel 8 ms started at 0; at t=4 it is half done. With the candidate
    // the remaining 4 ms of work run at intf 2 and end at 12, plus 0.5 ms
    // residual. Deadline one millisecond earlier.
    const ModelProfile run = LinearProfile("r", Priority::kHigh, 40, 8.0, 0.5, 0.5,
                                           1, 0.0);
    GpuRuntimeState g(0, kDefaultMetricCount);
    g.running.push_back(RunningEntry(run, 7, 1, 0, 12.5 - 1.0));
    g.RecomputeAggregate();
    CHECK(CheckViolate(g, MakeCandidate(q, 1), pred, 4));
    // With a deadline it cannot meet anyway the candidate is not blamed.
    g.running[0].deadline_abs = 7.0;
    CHECK_FALSE(CheckViolate(g, MakeCandidate(q, 1), pred, 4));
    // Meets even with the candidate.
    g.running[0].deadline_abs = 13.0;
    CHECK_FALSE(CheckViolate(g, MakeCandidate(q, 1), pred, 4));
  }
}

TEST_CASE("progress projection") {
  const ModelProfile p = LinearProfile("r", Priority::kHigh, 40, 8.0, 0.5, 0.5, 1);
  const RunningTaskEntry e = RunningEntry(p, 1, 1, 0, 100);
  CHECK(ProjectCompletion(e, 1.0, 2.0, 4.0) == doctest::Approx(12.5));
  CHECK(ProjectCompletion(e, 2.0, 2.0, 4.0) == doctest::Approx(4.0 + 12.0 + 0.5));
  RunningTaskEntry pending = e;
  pending.kernel_started = false;
  pending.kernel_start_estimate = 6.0;
  CHECK(ProjectCompletion(pending, 1.0, 1.5, 4.0) == doctest::Approx(6 + 12 + 0.5));
}

TEST_CASE("property: condition (a) never rejects high priority") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ModelProfile hp = LinearProfile("hp", Priority::kHigh, 40, 1.0, 0.5, 0.5, 1,
                                        0.9);
  const ModelProfile lp = LinearProfile("lp", Priority::kLow, 400, 1.0, 0.5, 0.5, 1,
                                        0.9);
  TaskQueue q = QueueWith(hp, {0});
  for (int i = 0; i < 1000; ++i) {
    GpuRuntimeState g(0, kDefaultMetricCount);
    g.aimd.c_low = 75 + 25 * u(rng);
    // LP batches that would only suffer if they had deadlines; give them
    // unlimited slack so only condition (a) could fire.
    const int n = static_cast<int>(rng() % 4);
    for (int j = 0; j < n; ++j) g.running.push_back(RunningEntry(lp, j, 1, 0, 1e9));
    g.RecomputeAggregate();
    REQUIRE_FALSE(CheckViolate(g, MakeCandidate(q, 1), UnitPredictor(), 0.5));
  }
}

TEST_CASE("check_meet") {
  const InterferencePredictor pred = ClampedPredictor();
  const ModelProfile p = LinearProfile("m", Priority::kHigh, 10, 1.0);
  GpuRuntimeState idle(0, kDefaultMetricCount);
  TaskQueue q = QueueWith(p, {0});
  const MeetResult ok = CheckMeet(idle, MakeCandidate(q, 1), pred, 1.0);
  CHECK(ok.meets);
  CHECK(ok.estimate.total == doctest::Approx(p.InfIsol(1) + 1.0));

  // Busy GPU: assumed co-location is half the aggregate, here metric 0 at
  // 1.0 -> intf 2 under the unit predictor. Kernel 4 ms -> 4 ms extra.
  const ModelProfile big = LinearProfile("b", Priority::kHigh, 7, 4.0, 0.5, 0.5, 1);
  GpuRuntimeState busy(0, kDefaultMetricCount);
  busy.aggregate_throughput = {2.0, 0, 0, 0, 0};
  TaskQueue bq = QueueWith(big, {0});
  const MeetResult miss = CheckMeet(busy, MakeCandidate(bq, 1), UnitPredictor(), 0);
  CHECK(miss.assumed_m_avg[0] == 1.0);
  CHECK(miss.estimate.total == doctest::Approx(5.0 + 4.0));
  CHECK_FALSE(miss.meets);
  CHECK(CheckMeet(GpuRuntimeState(0, kDefaultMetricCount), MakeCandidate(bq, 1),
                  UnitPredictor(), 0)
            .meets);
}

TEST_CASE("best GPU is the feasible one with the lowest estimate") {
  const ModelProfile p = LinearProfile("m", Priority::kHigh, 20, 4.0, 2.0, 1.0, 1);
  CHECK(p.InfIsol(1) == 7.0);
  std::vector<GpuRuntimeState> gpus;
  gpus.emplace_back(0, kDefaultMetricCount);
  gpus.emplace_back(1, kDefaultMetricCount);
  gpus[0].pcie = PcieLink(2.0);  // 9 ms
  TaskQueue q = QueueWith(p, {0});
  StraitPolicy policy;
  const auto choice = policy.BestGpu(gpus, MakeCandidate(q, 1), ClampedPredictor(), 0);
  REQUIRE(choice);
  CHECK(choice->gpu == 1);
  CHECK(choice->meet.estimate.total == doctest::Approx(7.0));
  gpus[1].pcie = PcieLink(3.0);  // 10 ms
  CHECK(policy.BestGpu(gpus, MakeCandidate(q, 1), ClampedPredictor(), 0)->gpu == 0);
}

TEST_CASE("feedback after completion") {
  InterferencePredictor pred;
  const ModelProfile p = LinearProfile("m", Priority::kHigh, 20, 4.0);
  SUBCASE("isolated batch") {
    GpuRuntimeState g(0, kDefaultMetricCount);
    g.running.push_back(RunningEntry(p, 1, 2, 1.0, 100));
    const auto out = OnBatchComplete(g, 1, 8.8, 9.8, pred);
    CHECK(out.sample.intf_actual == doctest::Approx(8.8 / 8.0));
    CHECK(out.sample.m_avg_twa == Metrics(kDefaultMetricCount, 0.0));
    CHECK(out.completion_time == doctest::Approx(9.8 + p.ResidualIsol(2)));
    CHECK(g.running.empty());
    CHECK_FALSE(out.hp_violation);
  }
  SUBCASE("co-located for half its kernel") {
    GpuRuntimeState g(0, kDefaultMetricCount);
    RunningTaskEntry e = RunningEntry(p, 1, 1, 0, 100);
    e.timeline.Record(0, Metrics(kDefaultMetricCount, 0.8));
    e.timeline.Record(5, Metrics(kDefaultMetricCount, 0.0));
    g.running.push_back(std::move(e));
    const auto out = OnBatchComplete(g, 1, 10, 10, pred);
    for (double m : out.sample.m_avg_twa) CHECK(m == doctest::Approx(0.4));
  }
  SUBCASE("late high-priority batch resets c_low") {
    std::vector<GpuRuntimeState> gpus;
    gpus.emplace_back(0, kDefaultMetricCount);
    gpus[0].aimd.c_low = 90;
    const Timestamp done = 10.0;
    const Timestamp deadline = done + p.ResidualIsol(1) - 0.1;
    gpus[0].running.push_back(RunningEntry(p, 1, 1, 5, deadline));
    const auto out = OnBatchComplete(gpus[0], 1, 5, done, pred);
    CHECK(out.hp_violation);
    CHECK(out.late_requests.size() == 1);
    StraitPolicy policy;
    policy.OnHpViolation(gpus, 0, done);
    CHECK(gpus[0].aimd.c_low == 75);
  }
  GpuRuntimeState g(0, kDefaultMetricCount);
  CHECK_THROWS_AS(OnBatchComplete(g, 42, 1, 1, pred), SimulationError);
}

TEST_CASE("co-location timeline follows kernel residency") {
  const ModelProfile a = LinearProfile("a", Priority::kHigh, 40, 4.0, 0.5, 0.5, 1, 0.3);
  const ModelProfile b = LinearProfile("b", Priority::kLow, 40, 4.0, 0.5, 0.5, 1, 0.2);
  GpuRuntimeState g(0, kDefaultMetricCount);
  TaskQueue qa = QueueWith(a, {0});
  TaskQueue qb = QueueWith(b, {0});
  Dispatch(qa, g, 1, 1, 0, LatencyEstimate{}, {});
  OnKernelStart(g, 1, 0.5);
  Dispatch(qb, g, 1, 2, 2, LatencyEstimate{}, {});
  // Not co-located until b's kernel starts.
  CHECK(g.Find(1)->timeline.samples().back().value[0] == 0.0);
  OnKernelStart(g, 2, 2.5);
  CHECK(g.Find(1)->timeline.samples().back().time == 2.5);
  CHECK(g.Find(1)->timeline.samples().back().value[0] == doctest::Approx(0.2));
  CHECK(g.Find(2)->timeline.samples().back().value[0] == doctest::Approx(0.3));
  CHECK(g.aggregate_throughput[0] == doctest::Approx(0.5));
}
