#pragma once

// Bracketing d* for tiny instances: grid search over [0, R]^m, then a
// projected subgradient polish from the best grid point.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sepopt/problem.hpp"

namespace sepopt {

struct DualReference {
  double d_star_low = 0.0;
  double d_star_high = 0.0;
  Vec lambda_star_candidate;
  std::string method;
  double delta = 0.0;
  double radius = 0.0;
  std::uint64_t oracle_calls = 0;

  double width() const { return d_star_high - d_star_low; }
  double lambda_norm() const { return norm2(lambda_star_candidate); }
};

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BracketOptions {
  std::size_t polish_iterations = 2000;
  std::size_t max_grid_points = 2'000'000;
};

/// d is G~-Lipschitz, so a grid of spacing delta leaves at most G~ delta sqrt(m)
/// between the best grid value and d* whenever the maximizer lies in the box.
inline DualReference bracket_dual_optimum(const Instance& inst, double delta, double R, const BracketOptions& opts = {}) {
  const std::size_t m = inst.num_rows();
  if (m > 3) throw std::invalid_argument("bracket: grid mode supports m <= 3 only");
  if (!(delta > 0.0) || !(R > 0.0)) throw std::invalid_argument("bracket: delta and R must be positive");
  const auto per_axis = static_cast<std::size_t>(std::floor(R / delta + 1e-9)) + 1;
  std::size_t total = 1;
  for (std::size_t j = 0; j < m; ++j) {
    total *= per_axis;
    if (total > opts.max_grid_points) throw std::invalid_argument("bracket: grid too large, increase delta");
  }

  OracleCounter counter;
  DualReference out;
  out.delta = delta;
  out.radius = R;
  double best = -std::numeric_limits<double>::infinity();
  Vec best_lambda(m, 0.0), lambda(m, 0.0);
  std::vector<std::size_t> idx(m, 0);
  for (std::size_t p = 0; p < total; ++p) {
    std::size_t rest = p;
    for (std::size_t j = 0; j < m; ++j) {
      idx[j] = rest % per_axis;
      rest /= per_axis;
      lambda[j] = static_cast<double>(idx[j]) * delta;
    }
    const double v = dual_value(inst, lambda, counter).value;
    if (v > best) {
      best = v;
      best_lambda = lambda;
    }
  }
  for (std::size_t j = 0; j < m; ++j)
    if (best_lambda[j] > R - delta)
      throw BracketError("bracket: maximizer within delta of the box boundary in coordinate " + std::to_string(j) +
                         " (lambda_j = " + std::to_string(best_lambda[j]) + ", R = " + std::to_string(R) + "); enlarge R");

  // Polish: subgradient ascent with steps shrinking from delta.
  Vec x = best_lambda;
  for (std::size_t k = 0; k < opts.polish_iterations; ++k) {
    const DualEvaluation ev = dual_value(inst, x, counter);
    if (ev.value > best) {
      best = ev.value;
      best_lambda = x;
    }
    const double gn = norm2(ev.subgradient);
    if (gn == 0.0) break;
    const double step = delta / (gn * std::sqrt(static_cast<double>(k + 1)));
    for (std::size_t j = 0; j < m; ++j) x[j] += step * ev.subgradient[j];
    project_nonneg_inplace(x);
  }

  out.d_star_low = best;
  out.d_star_high = best + inst.G_tilde() * delta * std::sqrt(static_cast<double>(m));
  out.lambda_star_candidate = best_lambda;
  out.method = "grid(delta=" + std::to_string(delta) + ", R=" + std::to_string(R) + ") + subgradient polish";
  out.oracle_calls = counter.calls;
  return out;
}

}  // namespace sepopt
