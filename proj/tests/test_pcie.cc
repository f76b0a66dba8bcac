#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "strait/pcie.h"

using namespace strait;

TEST_CASE("upstream delay") {
  CHECK(PcieLink(5).EstimateUpstreamDelay(7) == 0);
  CHECK(PcieLink(12).EstimateUpstreamDelay(7) == 5);
}

TEST_CASE("three back-to-back transfers wait 0, 2 and 4 ms") {
  PcieLink link;
  std::vector<double> delays;
  for (int i = 0; i < 3; ++i) {
    delays.push_back(link.EstimateUpstreamDelay(0));
    link.Reserve(0, 2);
  }
  CHECK(delays == std::vector<double>{0, 2, 4});
}

TEST_CASE("reserve on idle and busy links") {
  PcieLink idle(0);
  idle.Reserve(10, 3);
  CHECK(idle.t_available() == 13);
  PcieLink busy(10);
  busy.Reserve(4, 3);
  CHECK(busy.t_available() == 13);

  PcieLink seq;
  seq.Reserve(0, 2);
  CHECK(seq.t_available() == 2);
  seq.Reserve(0, 2);
  CHECK(seq.t_available() == 4);
  seq.Reserve(5, 1);
  CHECK(seq.t_available() == 6);

  CHECK_THROWS_AS(seq.Reserve(0, 0), std::invalid_argument);
}

TEST_CASE("calibration replaces or shifts") {
  PcieLink a(10);
  const auto r = a.Reserve(10, 3);
  CHECK(r.predicted_end == 13);
  a.Calibrate(r.id, 12.5);
  CHECK(a.t_available() == 12.5);

  PcieLink b(10);
  const auto first = b.Reserve(10, 3);
  b.Reserve(10, 2);
  CHECK(b.t_available() == 15);
  b.Calibrate(first.id, 13.4);
  CHECK(b.t_available() == doctest::Approx(15.4).epsilon(1e-15));
  CHECK(b.pending().size() == 1);
  CHECK(b.pending().front().predicted_start == doctest::Approx(13.4));

  PcieLink c(10);
  const auto same = c.Reserve(10, 3);
  c.Reserve(11, 1);
  const double before = c.t_available();
  c.Calibrate(same.id, 13);
  CHECK(c.t_available() == before);

  c.Calibrate(999, 50);  // unknown id
  CHECK(c.t_available() == before);
}

TEST_CASE("reserve then estimate returns t_htod plus prior delay") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0), d(0.01, 5.0);
  for (int i = 0; i < 1000; ++i) {
    PcieLink link(u(rng));
    const double now = u(rng);
    const double prior = link.EstimateUpstreamDelay(now);
    const double htod = d(rng);
    link.Reserve(now, htod);
    CHECK(link.EstimateUpstreamDelay(now) == doctest::Approx(prior + htod).epsilon(1e-12));
  }
}

TEST_CASE("property: reserved transfers never overlap") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> gap(0.0, 3.0), d(0.01, 4.0);
  for (int seq = 0; seq < 10'000; ++seq) {
    PcieLink link;
    double now = 0;
    double prev_end = 0;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      now += gap(rng);
      REQUIRE(link.EstimateUpstreamDelay(now) >= 0);
      const auto r = link.Reserve(now, d(rng));
      REQUIRE(r.predicted_start == std::max(now, prev_end));
      REQUIRE(r.predicted_end > r.predicted_start);
      prev_end = r.predicted_end;
    }
  }
}
