#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "sepopt/agents.hpp"
#include "sepopt/ev.hpp"
#include "sepopt/problem.hpp"
#include "sepopt/rng.hpp"
#include "sepopt/vector_ops.hpp"
#include "support/fixtures.hpp"

using namespace sepopt;

TEST(PlusNorm, ClipsNegativeEntries) { EXPECT_EQ(plus_norm(Vec{-1.0, 2.0}), 2.0); }
TEST(PlusNorm, ZeroVector) { EXPECT_EQ(plus_norm(Vec{0.0, 0.0}), 0.0); }
TEST(PlusNorm, ThreeFourFive) { EXPECT_EQ(plus_norm(Vec{3.0, 4.0}), 5.0); }
TEST(PlusNorm, EmptyVector) { EXPECT_EQ(plus_norm(Vec{}), 0.0); }

TEST(ProjectNonneg, Examples) {
  EXPECT_EQ(project_nonneg(Vec{-1.0, 2.0}), (Vec{0.0, 2.0}));
  EXPECT_EQ(project_nonneg(Vec{0.0, 0.0}), (Vec{0.0, 0.0}));
  const Vec p = project_nonneg(Vec{5.0, -0.0});
  EXPECT_EQ(p[0], 5.0);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_FALSE(std::signbit(p[1]));
}

TEST(PlusNormProperty, ZeroIffNonpositive) {
  Rng rng(11);
  for (int k = 0; k < 2000; ++k) {
    Vec v(1 + rng.uniform_index(6));
    for (double& x : v) x = rng.uniform01() < 0.3 ? 0.0 : rng.uniform(-1.0, 1.0);
    bool nonpos = true;
    for (double x : v) nonpos = nonpos && x <= 0.0;
    EXPECT_EQ(plus_norm(v) == 0.0, nonpos);
  }
}

TEST(ProjectNonnegProperty, IdempotentAndOneLipschitz) {
  Rng rng(12);
  for (int k = 0; k < 2000; ++k) {
    const std::size_t m = 1 + rng.uniform_index(6);
    Vec a(m), b(m);
    for (std::size_t j = 0; j < m; ++j) {
      a[j] = rng.uniform(-3.0, 3.0);
      b[j] = rng.uniform(-3.0, 3.0);
    }
    const Vec pa = project_nonneg(a);
    EXPECT_EQ(project_nonneg(pa), pa);
    EXPECT_LE(distance(pa, project_nonneg(b)), distance(a, b) + 1e-15);
  }
}

TEST(DualValue, NonnegativeCostPicksZero) {
  const Instance inst = fixtures::binary_agent(+1.0);
  OracleCounter c;
  const auto ev = dual_value(inst, Vec{0.0}, c);
  EXPECT_EQ(ev.value, 0.0);
  EXPECT_EQ(ev.subgradient, Vec{-0.5});
  EXPECT_EQ(ev.minimizers[0].point, Vec{0.0});
}

TEST(DualValue, NegativeCostAtZeroMultiplier) {
  const Instance inst = fixtures::binary_agent(-1.0);
  OracleCounter c;
  const auto ev = dual_value(inst, Vec{0.0}, c);
  EXPECT_EQ(ev.value, -1.0);
  EXPECT_EQ(ev.subgradient, Vec{0.5});
  EXPECT_EQ(ev.minimizers[0].point, Vec{1.0});
}

TEST(DualValue, NegativeCostAtUnitMultiplier) {
  const Instance inst = fixtures::binary_agent(-1.0);
  OracleCounter c;
  // Enumerate x in {0, 1}: -0.5 * 1 + min(0, -1 + 1).
  const double expect = -0.5 + std::min(0.0, -1.0 + 1.0);
  EXPECT_EQ(dual_value(inst, Vec{1.0}, c).value, expect);
  EXPECT_EQ(expect, -0.5);
}

TEST(DualValue, CountsOneCallPerAgent) {
  const auto t = fixtures::five_finite();
  OracleCounter c;
  dual_value(t.inst, Vec{0.1, 0.2}, c);
  dual_value(t.inst, Vec{0.0, 0.0}, c);
  EXPECT_EQ(c.calls, 10u);
}

TEST(DualValue, RejectsNegativeMultiplier) {
  const Instance inst = fixtures::binary_agent(-1.0);
  OracleCounter c;
  EXPECT_THROW(dual_value(inst, Vec{-0.1}, c), std::invalid_argument);
}

TEST(DualValue, ValueMatchesMinimizers) {
  ev::EvInstanceConfig cfg;
  cfg.N = 30;
  cfg.m = 6;
  cfg.seed = 5;
  const Instance inst = ev::generate_ev_instance(cfg);
  OracleCounter c;
  const Vec lambda{0.01, 0.0, 0.03, 0.02, 0.0, 0.05};
  const auto ev = dual_value(inst, lambda, c);
  double acc = 0.0;
  for (const auto& a : ev.minimizers) acc += a.cost + dot(lambda, a.coupling);
  EXPECT_NEAR(ev.value, -dot(lambda, inst.b()) + acc / 30.0, 1e-12);
}

TEST(CouplingResidual, ZeroPointsZeroB) {
  std::vector<AgentPtr> a{fixtures::interval(1.0), fixtures::interval(2.0)};
  const Instance inst(a, Vec{0.0});
  const std::vector<Vec> pts{{0.0}, {0.0}};
  EXPECT_EQ(coupling_residual(inst, pts), Vec{0.0});
}

TEST(CouplingResidual, TwoAgentsAverage) {
  std::vector<AgentPtr> a{std::make_shared<FiniteSetAgent>(std::vector<Vec>{{1.0}}, Vec{0.0}, DenseMatrix::from_rows({{1.0}})),
                          std::make_shared<FiniteSetAgent>(std::vector<Vec>{{3.0}}, Vec{0.0}, DenseMatrix::from_rows({{1.0}}))};
  const Instance inst(a, Vec{1.0});
  const std::vector<Vec> pts{{1.0}, {3.0}};
  EXPECT_EQ(coupling_residual(inst, pts), Vec{1.0});
}

TEST(CouplingResidual, EvMinimizersMatchDirectSum) {
  ev::EvInstanceConfig cfg;
  cfg.N = 12;
  cfg.m = 5;
  cfg.seed = 3;
  const auto data = ev::generate_ev_data(cfg);
  const Instance inst = ev::make_ev_instance(data);
  OracleCounter c;
  const auto ev = dual_value(inst, Vec(5, 0.0), c);
  std::vector<Vec> pts;
  for (const auto& a : ev.minimizers) pts.push_back(a.point);
  const Vec r = coupling_residual(inst, pts);
  // Direct summation from the raw parameters: sum_i P_i x_ij / N - P_max / N.
  for (std::size_t j = 0; j < 5; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 12; ++i) s += data.agents[i].P * pts[i][j];
    EXPECT_NEAR(r[j], s / 12.0 - data.P_max / 12.0, 1e-12);
  }
}

TEST(CouplingResidual, ReportsDomainViolation) {
  std::vector<AgentPtr> a{fixtures::interval(1.0), fixtures::interval(2.0)};
  const Instance inst(a, Vec{0.0});
  const std::vector<Vec> pts{{0.0}, {1.5}};
  try {
    coupling_residual(inst, pts);
    FAIL() << "expected a domain violation";
  } catch (const DomainViolation& e) {
    EXPECT_EQ(e.agent(), 1u);
  }
}

TEST(PrimalCost, ZeroCostAgents) {
  std::vector<AgentPtr> a{fixtures::interval(0.0), fixtures::interval(0.0)};
  const Instance inst(a, Vec{1.0});
  const std::vector<Vec> pts{{0.3}, {1.0}};
  EXPECT_EQ(primal_cost(inst, pts), 0.0);
}

TEST(PrimalCost, ArithmeticMean) {
  std::vector<AgentPtr> a{fixtures::interval(2.0), fixtures::interval(4.0)};
  const Instance inst(a, Vec{1.0});
  const std::vector<Vec> pts{{1.0}, {1.0}};
  EXPECT_EQ(primal_cost(inst, pts), 3.0);
}

TEST(PrimalCost, EvAtEnumeratedMinimizer) {
  const ev::EvAgent agent = fixtures::ev_three_slot();
  std::vector<AgentPtr> a{std::make_shared<ev::EvAgent>(agent)};
  const Instance inst(a, Vec(3, 1.0));
  double best = INFINITY;
  Vec arg;
  for (int mask = 0; mask < 8; ++mask) {
    Vec x{double(mask & 1), double((mask >> 1) & 1), double((mask >> 2) & 1)};
    const double k = x[0] + x[1] + x[2];
    if (k < 2 || k > 3) continue;
    const double c = 3 * x[0] + 1 * x[1] + 2 * x[2];
    if (c < best) {
      best = c;
      arg = x;
    }
  }
  const std::vector<Vec> pts{arg};
  EXPECT_EQ(primal_cost(inst, pts), best);
}

TEST(Instance, RejectsDegenerateShapes) {
  EXPECT_THROW(Instance({}, Vec{1.0}), std::invalid_argument);
  std::vector<AgentPtr> a{fixtures::interval(1.0)};
  EXPECT_THROW(Instance(a, Vec{}), std::invalid_argument);
  EXPECT_THROW(Instance(a, Vec{1.0, 2.0}), DomainViolation);
}

TEST(Instance, ConstantsAggregateAgentBounds) {
  const auto t = fixtures::four_boxes();
  double g = 0.0, d2 = 0.0, h = 0.0;
  for (std::size_t i = 0; i < t.inst.num_agents(); ++i) {
    const auto& b = t.inst.agent_bounds(i);
    g = std::max(g, b.coupling_row_bound);
    h = std::max(h, b.cost_bound);
    d2 += b.diameter_bound * b.diameter_bound;
  }
  EXPECT_GE(t.inst.G_tilde(), g);
  EXPECT_EQ(t.inst.H(), h);
  EXPECT_NEAR(t.inst.D() * t.inst.D(), d2 / 4.0, 1e-12);
}

TEST(Instance, BoxCouplingBoundDominatesVertices) {
  const auto t = fixtures::four_boxes();
  for (std::size_t i = 0; i < t.inst.num_agents(); ++i) {
    const auto& agent = t.inst.agent(i);
    for (int mask = 0; mask < 4; ++mask) {
      const Vec x{double(mask & 1), double((mask >> 1) & 1)};
      EXPECT_LE(distance(agent.coupling(x), t.inst.b()), t.inst.agent_bounds(i).coupling_row_bound + 1e-12);
    }
  }
}

namespace {

Instance probe_instance() {
  ev::EvInstanceConfig cfg;
  cfg.N = 20;
  cfg.m = 4;
  cfg.seed = 9;
  return ev::generate_ev_instance(cfg);
}

Vec random_lambda(Rng& rng, std::size_t m, double hi) {
  Vec l(m);
  for (double& x : l) x = rng.uniform01() < 0.2 ? 0.0 : rng.uniform(0.0, hi);
  return l;
}

}  // namespace

TEST(DualProperty, Concavity) {
  for (const Instance& inst : {probe_instance(), fixtures::four_boxes().inst, fixtures::five_finite().inst}) {
    Rng rng(21);
    OracleCounter c;
    const double scale_v = inst.G_tilde() + inst.H() + 1.0;
    for (int k = 0; k < 300; ++k) {
      const Vec a = random_lambda(rng, inst.num_rows(), 2.0), b = random_lambda(rng, inst.num_rows(), 2.0);
      const double th = rng.uniform01();
      Vec mid(a.size());
      for (std::size_t j = 0; j < a.size(); ++j) mid[j] = th * a[j] + (1 - th) * b[j];
      EXPECT_GE(dual_value(inst, mid, c).value,
                th * dual_value(inst, a, c).value + (1 - th) * dual_value(inst, b, c).value - 1e-9 * scale_v);
    }
  }
}

TEST(DualProperty, LipschitzWithGTilde) {
  for (const Instance& inst : {probe_instance(), fixtures::four_boxes().inst, fixtures::five_finite().inst}) {
    Rng rng(22);
    OracleCounter c;
    for (int k = 0; k < 300; ++k) {
      const Vec a = random_lambda(rng, inst.num_rows(), 2.0), b = random_lambda(rng, inst.num_rows(), 2.0);
      EXPECT_LE(std::abs(dual_value(inst, a, c).value - dual_value(inst, b, c).value),
                inst.G_tilde() * distance(a, b) + 1e-12);
    }
  }
}

TEST(DualProperty, SubgradientInequality) {
  for (const Instance& inst : {probe_instance(), fixtures::four_boxes().inst, fixtures::five_finite().inst}) {
    Rng rng(23);
    OracleCounter c;
    for (int k = 0; k < 300; ++k) {
      const Vec l = random_lambda(rng, inst.num_rows(), 2.0), mu = random_lambda(rng, inst.num_rows(), 2.0);
      const auto ev = dual_value(inst, l, c);
      EXPECT_LE(dual_value(inst, mu, c).value, ev.value + dot(ev.subgradient, subtract(mu, l)) + 1e-12);
    }
  }
}

TEST(AgentOracle, AtomCouplingMatchesRecomputation) {
  const Instance inst = probe_instance();
  Rng rng(24);
  for (int k = 0; k < 200; ++k) {
    const std::size_t i = rng.uniform_index(inst.num_agents());
    OracleQuery q{rng.uniform(0.0, 2.0), random_lambda(rng, inst.num_rows(), 1.0)};
    const OracleAtom a = inst.agent(i).minimize(q);
    EXPECT_TRUE(inst.agent(i).domain_contains(a.point));
    EXPECT_EQ(a.coupling, inst.agent(i).coupling(a.point));
    EXPECT_EQ(a.cost, inst.agent(i).cost(a.point));
  }
}

TEST(AgentOracle, BoxReturnsVertexWhenGammaZero) {
  const auto t = fixtures::four_boxes();
  Rng rng(25);
  for (int k = 0; k < 200; ++k) {
    const std::size_t i = rng.uniform_index(4);
    OracleQuery q{0.0, Vec{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}};
    for (double x : t.inst.agent(i).minimize(q).point) EXPECT_TRUE(x == 0.0 || x == 1.0);
  }
}
