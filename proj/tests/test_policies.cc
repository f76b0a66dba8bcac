#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <deque>
#include <random>
#include <set>

#include "strait/policies.h"
#include "test_util.h"

using namespace strait;
using strait::testing::LinearProfile;

namespace {

// Owns profiles, queues and GPUs for one scheduling pass.
struct World {
  std::deque<ModelProfile> profiles;
  std::vector<TaskQueue> queues;
  std::vector<GpuRuntimeState> gpus;
  InterferencePredictor predictor;
  BatchId next_batch = 0;
  RequestId next_request = 0;

  explicit World(int num_gpus, int limit = 4) {
    for (int g = 0; g < num_gpus; ++g) gpus.emplace_back(g, kDefaultMetricCount, limit);
  }
  std::size_t AddModel(ModelProfile p) {
    profiles.push_back(std::move(p));
    TaskQueue q;
    q.profile = &profiles.back();
    queues.push_back(std::move(q));
    return queues.size() - 1;
  }
  void Enqueue(std::size_t qi, Timestamp t, int n = 1) {
    for (int i = 0; i < n; ++i) {
      const ModelProfile& p = *queues[qi].profile;
      queues[qi].pending.push_back({next_request++, p.model_id, t, t + p.deadline});
    }
  }
  PassResult Pass(SchedulingPolicy& policy, Timestamp now) {
    SchedulingContext ctx{queues, gpus, predictor, now, next_batch};
    return policy.Schedule(ctx);
  }
};

}  // namespace

TEST_CASE("policy names") {
  for (auto k : {PolicyKind::kStrait, PolicyKind::kTemporal, PolicyKind::kStaticSpatial,
                 PolicyKind::kReactiveSpatial}) {
    CHECK(ParsePolicyKind(ToString(k)) == k);
    CHECK(MakePolicy(k)->kind() == k);
  }
  CHECK_THROWS_AS(ParsePolicyKind("fifo"), std::invalid_argument);
}

TEST_CASE("strait: single request on an idle GPU") {
  World w(1);
  const auto q = w.AddModel(LinearProfile("m", Priority::kHigh, 20, 1.0));
  w.Enqueue(q, 0);
  StraitPolicy policy;
  CHECK(w.Pass(policy, 0.5).decisions.empty());  // waiting for the timeout
  const PassResult r = w.Pass(policy, 1.0);
  REQUIRE(r.decisions.size() == 1);
  CHECK(r.decisions[0].size == 1);
  CHECK(r.decisions[0].gpu_id == 0);
}

TEST_CASE("strait: full queue yields a max-size batch") {
  World w(1);
  const auto q = w.AddModel(LinearProfile("m", Priority::kLow, 200, 0.5, 0.1, 0.1, 8,
                                          0.05));
  w.Enqueue(q, 0, 10);
  StraitPolicy policy;
  const PassResult r = w.Pass(policy, 0);
  REQUIRE(r.decisions.size() >= 1);
  CHECK(r.decisions[0].size == 8);
  CHECK(w.queues[q].pending.size() == 2);
}

TEST_CASE("strait: batch size limited by deadline") {
  // inf(k) = 2k + 0.5 under no interference; deadline 7 admits k <= 3.
  World w(1);
  PredictorParams p = PredictorParams::Initial();
  p.c = -100;
  w.predictor.set_params(p);
  const auto q = w.AddModel(LinearProfile("m", Priority::kHigh, 7, 1.5, 0.5, 0.5, 8,
                                          0.05, 0.0));
  w.Enqueue(q, 0, 8);
  StraitPolicy policy;
  const PassResult r = w.Pass(policy, 0);
  REQUIRE(!r.decisions.empty());
  CHECK(r.decisions[0].size == 3);
}

TEST_CASE("strait: high-priority decisions precede low-priority ones") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    World w(2);
    const auto lp1 = w.AddModel(LinearProfile("lp1", Priority::kLow, 50, 1.0, 0.2,
                                              0.2, 8, 0.1, 0.0));
    const auto hp = w.AddModel(LinearProfile("hp", Priority::kHigh, 30, 1.0, 0.2, 0.2,
                                             8, 0.1, 0.0));
    const auto lp2 = w.AddModel(LinearProfile("lp2", Priority::kLow, 50, 1.0, 0.2,
                                              0.2, 8, 0.1, 0.0));
    for (auto q : {lp1, hp, lp2}) {
      w.Enqueue(q, static_cast<double>(rng() % 5), 1 + static_cast<int>(rng() % 10));
    }
    StraitPolicy policy;
    const PassResult r = w.Pass(policy, 5);
    bool seen_low = false;
    for (const auto& d : r.decisions) {
      if (d.priority == Priority::kLow) seen_low = true;
      REQUIRE_FALSE((seen_low && d.priority == Priority::kHigh));
    }
    for (const auto& g : w.gpus) REQUIRE(static_cast<int>(g.running.size()) <= 4);
    // Every decision met its own deadline estimate when it was made.
    for (const auto& d : r.decisions) {
      const RunningTaskEntry* e = w.gpus[static_cast<std::size_t>(d.gpu_id)].Find(d.batch_id);
      REQUIRE(e != nullptr);
      REQUIRE(e->batch.front_enqueue_time + d.estimated_latency <= e->deadline_abs);
    }
  }
}

TEST_CASE("scan order: priority, then oldest front") {
  World w(1);
  const auto a = w.AddModel(LinearProfile("a", Priority::kLow, 50, 1.0));
  const auto b = w.AddModel(LinearProfile("b", Priority::kHigh, 50, 1.0));
  const auto c = w.AddModel(LinearProfile("c", Priority::kLow, 50, 1.0));
  w.AddModel(LinearProfile("d", Priority::kHigh, 50, 1.0));  // empty
  w.Enqueue(a, 3);
  w.Enqueue(b, 5);
  w.Enqueue(c, 1);
  CHECK(ScanOrder(w.queues, true) == std::vector<std::size_t>{b, c, a});
  CHECK(ScanOrder(w.queues, false) == std::vector<std::size_t>{c, a, b});
}

TEST_CASE("strait AIMD hooks") {
  std::vector<GpuRuntimeState> gpus;
  gpus.emplace_back(0, kDefaultMetricCount);
  gpus.emplace_back(1, kDefaultMetricCount);
  StraitPolicy policy;
  policy.OnTick(gpus, 1000);
  CHECK(gpus[0].aimd.c_low == 77.5);
  CHECK(gpus[1].aimd.c_low == 77.5);
  policy.OnHpViolation(gpus, 1, 1000);
  CHECK(gpus[0].aimd.c_low == 77.5);
  CHECK(gpus[1].aimd.c_low == 75);
  policy.OnHpViolation(gpus, -1, 1000);
  CHECK(gpus[0].aimd.c_low == 75);

  StraitOptions off;
  off.violate_and_aimd = false;
  StraitPolicy ablated(off);
  ablated.OnTick(gpus, 3000);
  CHECK(gpus[0].aimd.c_low == 75);
}

TEST_CASE("temporal: one batch per GPU") {
  World w(1);
  const auto q = w.AddModel(LinearProfile("m", Priority::kHigh, 30, 1.0));
  w.Enqueue(q, 0, 3);
  TemporalPolicy policy;
  const PassResult first = w.Pass(policy, 1.0);
  REQUIRE(first.decisions.size() == 1);
  CHECK(first.decisions[0].size == 3);
  w.Enqueue(q, 1.0, 2);
  CHECK(w.Pass(policy, 5.0).decisions.empty());  // GPU busy
}

TEST_CASE("temporal: size is the largest meeting the front deadline in isolation") {
  World w(1);
  // inf(k) = 2k + 0.5; deadline 9 from t=0, now 1, so 1 + 2k + 0.5 <= 9 -> k <= 3.
  const auto q = w.AddModel(LinearProfile("m", Priority::kHigh, 9, 1.5, 0.5, 0.5, 8));
  w.Enqueue(q, 0, 8);
  TemporalPolicy policy;
  const PassResult r = w.Pass(policy, 1.0);
  REQUIRE(r.decisions.size() == 1);
  CHECK(r.decisions[0].size == 3);
}

TEST_CASE("static: cap of three per GPU regardless of interference") {
  World w(1);
  const auto q = w.AddModel(LinearProfile("m", Priority::kLow, 30, 1.0, 0.5, 0.5, 2,
                                          0.9));
  w.Enqueue(q, 0, 10);
  StaticSpatialPolicy policy;
  const PassResult r = w.Pass(policy, 0);
  CHECK(r.decisions.size() == 3);
  for (const auto& d : r.decisions) CHECK(d.size == 2);
  CHECK(w.Pass(policy, 0).decisions.empty());
  w.gpus[0].running.pop_back();
  CHECK(w.Pass(policy, 0).decisions.size() == 1);
}

TEST_CASE("static: least-loaded GPU") {
  World w(3);
  const auto q = w.AddModel(LinearProfile("m", Priority::kLow, 30, 1.0, 0.5, 0.5, 1));
  w.Enqueue(q, 0, 3);
  StaticSpatialPolicy policy;
  const PassResult r = w.Pass(policy, 0);
  std::set<GpuId> used;
  for (const auto& d : r.decisions) used.insert(d.gpu_id);
  CHECK(used.size() == 3);
}

TEST_CASE("reactive: allowance, decrement and periodic reset") {
  World w(1);
  const auto lp = w.AddModel(LinearProfile("lp", Priority::kLow, 30, 1.0, 0.5, 0.5, 1));
  const auto hp = w.AddModel(LinearProfile("hp", Priority::kHigh, 30, 1.0, 0.5, 0.5, 1));
  ReactiveState st;
  st.lp_allowance = 1;
  ReactiveSpatialPolicy policy(st);
  w.Enqueue(lp, 0, 2);
  w.Enqueue(hp, 0, 1);
  const PassResult r = w.Pass(policy, 0);
  REQUIRE(r.decisions.size() == 2);
  CHECK(r.decisions[0].priority == Priority::kHigh);
  CHECK(r.decisions[1].priority == Priority::kLow);
  CHECK(w.queues[lp].pending.size() == 1);  // second LP deferred

  ReactiveSpatialPolicy fresh;
  std::vector<GpuRuntimeState> gpus;
  fresh.OnHpViolation(gpus, 0, 10);
  CHECK(fresh.state().lp_allowance == 2);
  fresh.OnHpViolation(gpus, 0, 20);
  fresh.OnHpViolation(gpus, 0, 30);
  CHECK(fresh.state().lp_allowance == 1);
  fresh.OnTick(gpus, 150);
  CHECK(fresh.state().lp_allowance == 1);
  fresh.OnTick(gpus, 200);
  CHECK(fresh.state().lp_allowance == 3);
}

TEST_CASE("reactive: global limit of four") {
  World w(1);
  const auto hp = w.AddModel(LinearProfile("hp", Priority::kHigh, 30, 1.0, 0.5, 0.5, 1));
  const auto lp = w.AddModel(LinearProfile("lp", Priority::kLow, 30, 1.0, 0.5, 0.5, 1));
  w.Enqueue(hp, 0, 5);
  w.Enqueue(lp, 0, 5);
  ReactiveSpatialPolicy policy;
  const PassResult r = w.Pass(policy, 0);
  CHECK(r.decisions.size() == 4);
  CHECK(w.gpus[0].CountRunning(Priority::kHigh) == 3);
  CHECK(w.gpus[0].CountRunning(Priority::kLow) == 1);
}

TEST_CASE("all policies drop the same requests") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::set<RequestId>> dropped_sets;
    const std::uint64_t seed = rng();
    for (auto kind : {PolicyKind::kStrait, PolicyKind::kTemporal,
                      PolicyKind::kStaticSpatial, PolicyKind::kReactiveSpatial}) {
      std::mt19937_64 local(seed);
      World w(2);
      const auto a = w.AddModel(LinearProfile("a", Priority::kHigh, 6, 1.0));
      const auto b = w.AddModel(LinearProfile("b", Priority::kLow, 9, 1.0));
      for (int i = 0; i < 12; ++i) {
        w.Enqueue(i % 2 ? a : b, static_cast<double>(local() % 100) / 10.0);
      }
      for (auto& q : w.queues) {
        std::sort(q.pending.begin(), q.pending.end(),
                  [](const Request& x, const Request& y) {
                    return x.arrival_time < y.arrival_time;
                  });
      }
      auto policy = MakePolicy(kind);
      const PassResult r = w.Pass(*policy, 8.0);
      std::set<RequestId> ids;
      for (const auto& d : r.dropped) ids.insert(d.request_id);
      dropped_sets.push_back(ids);
    }
    for (const auto& s : dropped_sets) REQUIRE(s == dropped_sets.front());
  }
}
