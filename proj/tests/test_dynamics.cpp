#include <gtest/gtest.h>

#include "support.hpp"

using namespace headway;
using headway::fixtures::rel_err;

namespace {

// d = 1000 m, v = 30 m/s, one lane at 0.5 m jam spacing: jam density 2 veh/m.
const Link kLink{0, 0, 1, 1000.0, 1, 30.0, 0.5};

}  // namespace

TEST(CriticalDensity, HandValues) {
  EXPECT_LE(rel_err(critical_density(2, 0.0, 2.0, 6.0), 1.0 / 3.0), 1e-9);
  EXPECT_LE(rel_err(critical_density(2, 1.0, 2.0, 6.0), 1.0), 1e-9);
  EXPECT_LE(rel_err(critical_density(2, 0.5, 2.0, 6.0), 0.5), 1e-9);
}

TEST(CriticalDensity, RejectsBadInputs) {
  EXPECT_THROW(critical_density(2, 0.5, 0.0, 6.0), DomainError);
  EXPECT_THROW(critical_density(2, 0.5, 2.0, -1.0), DomainError);
  EXPECT_THROW(critical_density(0, 0.5, 2.0, 6.0), DomainError);
}

TEST(CriticalDensity, StrictlyDecreasingInAutonomousHeadway) {
  for (double alpha : {0.1, 0.5, 1.0}) {
    double prev = critical_density(3, alpha, 1.0, 6.0);
    for (double beta = 1.5; beta <= 10.0; beta += 0.5) {
      const double cur = critical_density(3, alpha, beta, 6.0);
      EXPECT_LT(cur, prev);
      prev = cur;
    }
  }
}

TEST(CriticalDensity, BetweenPureClassValues) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0), beta(1.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), ba = beta(rng), bh = beta(rng);
    const double nc = critical_density(4, a, ba, bh);
    EXPECT_GE(nc, 4.0 / std::max(ba, bh) * (1 - 1e-15));
    EXPECT_LE(nc, 4.0 / std::min(ba, bh) * (1 + 1e-15));
  }
}

TEST(Capacity, Product) {
  EXPECT_LE(rel_err(capacity(30.0, 0.5), 15.0), 1e-9);
  EXPECT_EQ(capacity(30.0, 0.0), 0.0);
  const double c0 = capacity(30.0, critical_density(2, 0.0, 6.0, 6.0));
  for (double alpha : {0.2, 0.7, 1.0}) EXPECT_DOUBLE_EQ(capacity(30.0, critical_density(2, alpha, 6.0, 6.0)), c0);
}

TEST(SendingFlow, Branches) {
  EXPECT_LE(rel_err(sending_flow(200.0, kLink, 0.5), 6.0), 1e-9);
  EXPECT_LE(rel_err(sending_flow(500.0, kLink, 0.5), 15.0), 1e-9);
  EXPECT_LE(rel_err(sending_flow(1250.0, kLink, 0.5), 7.5), 1e-9);
  EXPECT_EQ(sending_flow(2000.0, kLink, 0.5), 0.0);
}

TEST(SendingFlow, CriticalAtOrAboveJamIsAnInvariantViolation) {
  EXPECT_THROW(sending_flow(10.0, kLink, 2.0), InvariantViolation);
}

TEST(SendingFlow, CongestedBranchStrictlyDecreasing) {
  double prev = sending_flow(501.0, kLink, 0.5);
  for (double n = 550.0; n <= 2000.0; n += 50.0) {
    const double f = sending_flow(n, kLink, 0.5);
    EXPECT_LT(f, prev);
    prev = f;
  }
}

TEST(SendingFlow, ContinuousAtCriticalDensity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0), beta(1.0, 10.0), len(100.0, 300000.0);
  std::uniform_int_distribution<int> lanes(1, 8);
  for (int i = 0; i < 1000; ++i) {
    const Link l{0, 0, 1, len(rng), lanes(rng), 5.0 + 40.0 * u(rng), 0.5};
    const double nc = critical_density(l.lanes, u(rng), beta(rng), beta(rng));
    const double eps = 1e-12 * nc;
    const double below = sending_flow((nc - eps) * l.length_m, l, nc);
    const double above = sending_flow((nc + eps) * l.length_m, l, nc);
    EXPECT_LE(std::abs(below - above) / below, 1e-9);
  }
}

TEST(CongestionState, Boundary) {
  EXPECT_EQ(congestion_state(0.0, 0.5), 0);
  EXPECT_EQ(congestion_state(0.5, 0.5), 0);
  EXPECT_EQ(congestion_state(1.25, 0.5), 1);
}

TEST(LinkLatency, HandValues) {
  EXPECT_LE(rel_err(link_latency(6.0, 0, kLink, 0.5), 1000.0 / 30.0), 1e-9);
  EXPECT_LE(rel_err(link_latency(15.0, 1, kLink, 0.5), 1000.0 / 30.0), 1e-9);
  EXPECT_LE(rel_err(link_latency(7.5, 1, kLink, 0.5), 1000.0 * (2.0 / 7.5 - 1.5 / 15.0)), 1e-9);
  EXPECT_LE(rel_err(link_latency(7.5, 1, kLink, 0.5), 166.66666666666666), 1e-9);
}

TEST(LinkLatency, ZeroCongestedFlowHitsSentinel) {
  EXPECT_EQ(link_latency(0.0, 1, kLink, 0.5), kLatencySentinel_s);
}

TEST(LinkLatency, ContinuousAtCapacityAndBoundedBelow) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0), beta(1.0, 10.0), len(100.0, 300000.0);
  std::uniform_int_distribution<int> lanes(1, 8);
  for (int i = 0; i < 1000; ++i) {
    const Link l{0, 0, 1, len(rng), lanes(rng), 5.0 + 40.0 * u(rng), 0.5};
    const double nc = critical_density(l.lanes, u(rng), beta(rng), beta(rng));
    EXPECT_LE(rel_err(link_latency(capacity(l.vff_mps, nc), 1, l, nc), l.length_m / l.vff_mps), 1e-9);
    const double n = l.length_m * (nc + u(rng) * (l.jam_density() - nc));
    EXPECT_GE(link_latency(sending_flow(n, l, nc), congestion_state(n / l.length_m, nc), l, nc),
              l.length_m / l.vff_mps);
  }
}

TEST(PathLatency, Sums) {
  const std::vector<double> lat{8000.0, 8000.0, 8000.0, 8000.0, 2000.0};
  EXPECT_EQ(path_latency(Path{0, {}}, lat), 0.0);
  EXPECT_DOUBLE_EQ(path_latency(Path{0, {0, 1}}, lat), 16000.0);
  EXPECT_DOUBLE_EQ(path_latency(Path{1, {0, 4, 3}}, lat), 18000.0);
}
