#pragma once

// Small instances with hand-checkable duals, shared by unit and acceptance tests.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sepopt/agents.hpp"
#include "sepopt/ev.hpp"
#include "sepopt/problem.hpp"

namespace fixtures {

using sepopt::AgentPtr;
using sepopt::BoxLinearAgent;
using sepopt::DenseMatrix;
using sepopt::FiniteSetAgent;
using sepopt::Instance;
using sepopt::Vec;

struct Tiny {
  std::string name;
  Instance inst;
  // Closed-form optimum where one is known; empty otherwise.
  std::optional<double> d_star;
  std::optional<Vec> lambda_star;
};

/// Domain {0, 1}, h(x) = sign * x, coupling x, b = 0.5.
inline Instance binary_agent(double sign) {
  std::vector<AgentPtr> a{std::make_shared<FiniteSetAgent>(std::vector<Vec>{{0.0}, {1.0}}, Vec{0.0, sign},
                                                           DenseMatrix::from_rows({{1.0}}))};
  return Instance(std::move(a), Vec{0.5});
}

inline std::shared_ptr<BoxLinearAgent> interval(double c, double a = 1.0) {
  return std::make_shared<BoxLinearAgent>(Vec{0.0}, Vec{1.0}, Vec{c}, DenseMatrix::from_rows({{a}}));
}

/// d(lambda) = -lambda/2 + min(0, lambda - 1): maximized at lambda = 1, d* = -1/2.
inline Tiny single_binary() { return {"single-binary", binary_agent(-1.0), -0.5, Vec{1.0}}; }

/// Three unit intervals with costs -1, -2, -1/2 sharing b = 1/2. The dual slope
/// is 1/2, 1/6, -1/6 on (0, 1/2), (1/2, 1), (1, 2), so lambda* = 1 and d* = -5/6.
inline Tiny three_intervals() {
  std::vector<AgentPtr> a{interval(-1.0), interval(-2.0), interval(-0.5)};
  return {"three-intervals", Instance(std::move(a), Vec{0.5}), -5.0 / 6.0, Vec{1.0}};
}

/// Four boxes in [0,1]^2 with two coupled rows.
inline Tiny four_boxes() {
  std::vector<AgentPtr> a;
  const std::vector<Vec> costs{{-1.0, -0.6}, {-0.8, -1.2}, {-1.5, -0.3}, {-0.4, -0.9}};
  const std::vector<std::vector<Vec>> maps{{{1.0, 0.0}, {0.0, 1.0}},
                                           {{1.0, 0.5}, {0.0, 1.0}},
                                           {{0.8, 0.0}, {0.3, 1.0}},
                                           {{1.0, 0.2}, {0.2, 0.7}}};
  for (std::size_t i = 0; i < costs.size(); ++i)
    a.push_back(std::make_shared<BoxLinearAgent>(Vec{0.0, 0.0}, Vec{1.0, 1.0}, costs[i], DenseMatrix::from_rows(maps[i])));
  return {"four-boxes", Instance(std::move(a), Vec{0.45, 0.5}), std::nullopt, std::nullopt};
}

/// Five agents with finite domains in R^2, each containing the zero-cost
/// origin, so zero is strictly feasible.
inline Tiny five_finite() {
  std::vector<AgentPtr> a;
  for (int i = 0; i < 5; ++i) {
    const double s = 1.0 + 0.2 * i;
    std::vector<Vec> pts{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    Vec costs{0.0, -1.0 * s, -0.7 - 0.1 * i, -1.5 * s};
    a.push_back(std::make_shared<FiniteSetAgent>(pts, costs, DenseMatrix::from_rows({{1.0, 0.3}, {0.2, 1.0}})));
  }
  return {"five-finite", Instance(std::move(a), Vec{0.5, 0.4}), std::nullopt, std::nullopt};
}

/// Couplings never exceed b, so the constraint is inactive: lambda* = 0 and
/// d* = mean of the unconstrained minima.
inline Tiny slack_intervals() {
  std::vector<AgentPtr> a{interval(-1.0), interval(0.5), interval(-0.25)};
  return {"slack-intervals", Instance(std::move(a), Vec{2.0}), (-1.0 + 0.0 - 0.25) / 3.0, Vec{0.0}};
}

inline std::vector<Tiny> bound_suite() {
  std::vector<Tiny> out;
  out.push_back(single_binary());
  out.push_back(three_intervals());
  out.push_back(four_boxes());
  out.push_back(five_finite());
  out.push_back(slack_intervals());
  return out;
}

/// The three-slot vehicle with prices [3, 1, 2]: n_req = 2, k_max = 3.
inline sepopt::ev::EvAgent ev_three_slot() {
  sepopt::ev::EvAgentParams p;
  p.P = 1.0;
  p.delta = 1.0;
  p.xi = 1.0;
  p.E_init = 0.0;
  p.E_ref = 2.0;
  p.E_max = 3.0;
  return sepopt::ev::EvAgent(p, std::make_shared<const Vec>(Vec{3.0, 1.0, 2.0}));
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  const double n = static_cast<double>(xs.size());
  r.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return r;
}

}  // namespace fixtures
