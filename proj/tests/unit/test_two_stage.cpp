#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "sepopt/ev.hpp"
#include "sepopt/rng.hpp"
#include "sepopt/two_stage.hpp"
#include "support/fixtures.hpp"

using namespace sepopt;

namespace {

Instance ev_small(std::size_t n, std::size_t m, std::uint64_t seed) {
  ev::EvInstanceConfig c;
  c.N = n;
  c.m = m;
  c.seed = seed;
  return ev::generate_ev_instance(c);
}

TwoStageConfig config(std::size_t T, std::size_t K, TwoStageMode mode) {
  TwoStageConfig c;
  c.T = T;
  c.K = K;
  c.mode = mode;
  c.schedule = StepSchedule::diminishing(0.5);
  return c;
}

}  // namespace

TEST(TwoStage, NoBcfwStepsReturnsStageOneAverage) {
  const auto t = fixtures::three_intervals();
  const auto r = run_two_stage(t.inst, config(2, 0, TwoStageMode::convex));
  ASSERT_EQ(r.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.points[i][0], r.stage1.ledger[i].mean_point()[0], 1e-15);
  EXPECT_EQ(r.calls.stage2, 0u);
  const LiftedPoint lp = ledger_sum(r.stage1.ledger, 1);
  EXPECT_NEAR(r.beta_K, lp.beta, 1e-15);
}

TEST(TwoStage, SameConfigSameResult) {
  const Instance inst = ev_small(20, 4, 6);
  const auto c = config(60, 80, TwoStageMode::nonconvex);
  const auto a = run_two_stage(inst, c), b = run_two_stage(inst, c);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.beta_K, b.beta_K);
  EXPECT_EQ(a.trace, b.trace);
  auto c2 = c;
  c2.seed_stage2 = 17;
  EXPECT_NE(run_two_stage(inst, c2).beta_K, a.beta_K);
}

TEST(TwoStage, EndToEndReplayOnIntervals) {
  const double cs[3] = {-1.0, -2.0, -0.5}, as[3] = {1.0, 0.5, 2.0}, b = 0.6;
  std::vector<AgentPtr> ag;
  for (int i = 0; i < 3; ++i) ag.push_back(fixtures::interval(cs[i], as[i]));
  const Instance inst(std::move(ag), Vec{b});
  auto cfg = config(12, 15, TwoStageMode::convex);
  cfg.seed_stage1 = 41;
  cfg.seed_stage2 = 42;

  // Stage 1 by hand, sharing only the index stream.
  auto pick = [&](std::size_t i, double g, double l) { return as[i] * l + g * cs[i] < 0.0 ? 1.0 : 0.0; };
  Rng r1(41);
  double lam = 0.0, lam_sum = 0.0;
  double xsum[3] = {0, 0, 0}, cnt[3] = {0, 0, 0};
  for (std::size_t t = 0; t + 1 < 12; ++t) {
    lam_sum += lam;
    const std::size_t i = r1.uniform_index(3);
    const double x = pick(i, 1.0, lam);
    xsum[i] += x;
    cnt[i] += 1;
    lam = std::max(lam + cfg.schedule.alpha(t, 12) * (as[i] * x - b), 0.0);
  }
  lam_sum += lam;
  for (std::size_t i = 0; i < 3; ++i) xsum[i] += pick(i, 1.0, lam);
  const double lbar = lam_sum / 12.0;
  double d_bar = -lbar * b;
  for (std::size_t i = 0; i < 3; ++i) d_bar += std::min(0.0, cs[i] + as[i] * lbar) / 3.0;

  // Stage 2 from the averaged points.
  double x[3], bi[3], zi[3];
  for (std::size_t i = 0; i < 3; ++i) {
    x[i] = xsum[i] / (cnt[i] + 1);
    bi[i] = cs[i] * x[i] / 3.0;
    zi[i] = as[i] * x[i] / 3.0;
  }
  Rng r2(42);
  for (std::size_t k = 0; k < 15; ++k) {
    const double beta = bi[0] + bi[1] + bi[2], z = zi[0] + zi[1] + zi[2];
    const std::size_t i = r2.uniform_index(3);
    const double xi = pick(i, std::max(beta - d_bar, 0.0), std::max(z - b, 0.0));
    const double rho = 6.0 / (double(k) + 6.0);
    bi[i] = (1 - rho) * bi[i] + rho * cs[i] * xi / 3.0;
    zi[i] = (1 - rho) * zi[i] + rho * as[i] * xi / 3.0;
    x[i] = (1 - rho) * x[i] + rho * xi;
  }

  const auto r = run_two_stage(inst, cfg);
  EXPECT_NEAR(r.stage1.lambda_bar[0], lbar, 1e-14);
  EXPECT_NEAR(r.d_bar_value, d_bar, 1e-14);
  EXPECT_NEAR(r.beta_K, bi[0] + bi[1] + bi[2], 1e-13);
  EXPECT_NEAR(r.z_K[0], zi[0] + zi[1] + zi[2], 1e-13);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.points[i][0], x[i], 1e-13) << i;
  EXPECT_NEAR(r.cost, (cs[0] * x[0] + cs[1] * x[1] + cs[2] * x[2]) / 3.0, 1e-13);
}

TEST(TwoStage, CallTotals) {
  const Instance inst = ev_small(15, 5, 2);
  for (auto [T, K] : {std::pair<std::size_t, std::size_t>{2, 0}, {30, 45}, {100, 7}}) {
    const auto r = run_two_stage(inst, config(T, K, TwoStageMode::nonconvex));
    EXPECT_EQ(r.calls.stage1, T - 1 + 15);
    EXPECT_EQ(r.calls.handoff, 15u);
    EXPECT_EQ(r.calls.stage2, K);
    EXPECT_EQ(r.calls.total, (T - 1) + 2 * 15 + K);
  }
}

TEST(TwoStage, ConvexModeRejectsNonconvexInstances) {
  const Instance inst = ev_small(5, 3, 1);
  EXPECT_THROW(run_two_stage(inst, config(10, 10, TwoStageMode::convex)), std::invalid_argument);
  EXPECT_THROW(run_two_stage(inst, config(1, 10, TwoStageMode::nonconvex)), std::invalid_argument);
}

TEST(TwoStage, NonconvexOutputsAndMetricIdentities) {
  const Instance inst = ev_small(20, 4, 9);
  const auto r = run_two_stage(inst, config(200, 400, TwoStageMode::nonconvex));
  ASSERT_TRUE(r.reduced.has_value());
  EXPECT_LE(r.reduced->nontrivial.size(), 5u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_TRUE(inst.agent(i).domain_contains(r.points[i]));
  EXPECT_NEAR(r.cost, primal_cost(inst, r.points), 1e-12);
  EXPECT_NEAR(r.gap, r.cost - r.d_ref, 1e-12);
  EXPECT_NEAR(r.bidual_gap, r.beta_K - r.d_ref, 1e-12);
  EXPECT_NEAR(r.infeasibility, plus_norm(coupling_residual(inst, r.points)), 1e-12);
  EXPECT_NEAR(r.bidual_infeasibility, plus_norm(subtract(r.z_K, inst.b())), 1e-12);
  EXPECT_EQ(r.d_ref, r.stage1.best_dual);
  EXPECT_LE(std::abs(r.cost - r.beta_K), 5.0 / 20.0 * inst.max_nonconvexity_gamma() + 1e-12);
  auto c = config(200, 400, TwoStageMode::nonconvex);
  c.d_ref = -0.25;
  EXPECT_NEAR(run_two_stage(inst, c).gap, r.cost + 0.25, 1e-12);
}

TEST(TwoStage, TraceSpansBothStages) {
  const Instance inst = ev_small(10, 3, 4);
  auto c = config(50, 40, TwoStageMode::nonconvex);
  c.stage1_trace_stride = 10;
  c.stage2_trace_stride = 10;
  const auto r = run_two_stage(inst, c);
  const auto& recs = r.trace.records;
  ASSERT_FALSE(recs.empty());
  for (std::size_t k = 1; k < recs.size(); ++k) EXPECT_LE(recs[k - 1].oracle_calls, recs[k].oracle_calls);
  EXPECT_EQ(recs.front().phase, Phase::ssg);
  EXPECT_EQ(recs.back().phase, Phase::bcfw);
  EXPECT_EQ(recs.back().oracle_calls, r.calls.total);
  EXPECT_NEAR(*recs.back().gap_plus, std::max(r.bidual_gap, 0.0), 1e-12);
}

TEST(TwoStage, SingletonDomainsHaveNoGap) {
  std::vector<AgentPtr> ag;
  for (int i = 0; i < 6; ++i)
    ag.push_back(std::make_shared<FiniteSetAgent>(std::vector<Vec>{{0.1 * i}}, Vec{-0.3 * i},
                                                  DenseMatrix::from_rows({{1.0}})));
  const Instance inst(std::move(ag), Vec{1.0});
  const auto r = run_two_stage(inst, config(20, 30, TwoStageMode::nonconvex));
  const double mean_h = -0.3 * 15.0 / 6.0;
  EXPECT_NEAR(r.cost, mean_h, 1e-14);
  EXPECT_NEAR(r.d_ref, mean_h, 1e-14);
  EXPECT_NEAR(r.gap, 0.0, 1e-14);
  EXPECT_EQ(r.infeasibility, 0.0);
}

TEST(TwoStage, InitModes) {
  const Instance inst = ev_small(12, 4, 3);
  auto c = config(40, 0, TwoStageMode::nonconvex);
  const FTarget tg{0.0, inst.b()};

  c.init = BcfwInit::stage1_ledger;
  const auto a = run_two_stage(inst, c);
  const LiftedPoint la = ledger_sum(a.stage1.ledger, 4);
  EXPECT_NEAR(a.beta_K, la.beta, 1e-14);

  c.init = BcfwInit::last_atom;
  const auto b = run_two_stage(inst, c);
  double beta = 0.0;
  for (const auto& atom : b.stage1.final_atoms) beta += atom.cost / 12.0;
  EXPECT_NEAR(b.beta_K, beta, 1e-14);
  for (const auto& al : b.stage2.ledger) EXPECT_EQ(al.atoms.size(), 1u);

  c.init = BcfwInit::automatic;
  EXPECT_EQ(run_two_stage(inst, c).beta_K, a.beta_K);

  c.init = BcfwInit::averaged_point;
  EXPECT_THROW(run_two_stage(inst, c), std::invalid_argument);
}
