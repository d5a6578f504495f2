#pragma once

// Electric-vehicle charging benchmark. Each vehicle picks a binary charging
// schedule x in {0,1}^m; cost is sum_j P C_j x_j and the coupling row is P x.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sepopt/problem.hpp"
#include "sepopt/rng.hpp"

namespace sepopt::ev {

struct EvAgentParams {
  double P = 1.0;      // charging rate (kW)
  double delta = 1.0;  // timestep length (h)
  double xi = 1.0;     // loss coefficient in (0, 1]
  double E_init = 0.0;
  double E_ref = 0.0;
  double E_max = 0.0;

  friend bool operator==(const EvAgentParams&, const EvAgentParams&) = default;
};

/// Charging-slot count limits implied by the energy constraints.
struct SlotLimits {
  std::int64_t n_req = 0;  // fewest slots reaching E_ref
  std::int64_t k_max = 0;  // most slots staying at or below E_max
};

/// Energy added by one charging slot.
inline double slot_energy(const EvAgentParams& p) { return p.P * p.delta * p.xi; }

namespace detail {

// Sign of the exact real value k * u - (a - c), from a nonoverlapping
// expansion built with error-free sums and products.
inline int exact_sign_scaled_minus_diff(double k, double u, double a, double c) {
  const double hi = k * u;
  const double lo = std::fma(k, u, -hi);
  const double terms[4] = {lo, hi, -a, c};
  std::vector<double> e;
  for (double t : terms) {
    double q = t;
    std::vector<double> next;
    for (double x : e) {
      const double s = q + x;
      const double bv = s - q;
      const double err = (q - (s - bv)) + (x - bv);
      if (err != 0.0) next.push_back(err);
      q = s;
    }
    if (q != 0.0) next.push_back(q);
    e = std::move(next);
  }
  if (e.empty()) return 0;
  return e.back() > 0.0 ? 1 : -1;
}

}  // namespace detail

/// n_req = ceil(max(E_ref - E_init, 0) / u) and k_max = floor((E_max - E_init) / u),
/// decided by exact comparisons of k u against the energy differences, so an
/// exact multiple is never pushed across a boundary by rounding.
inline SlotLimits slot_limits(const EvAgentParams& p) {
  const double u = slot_energy(p);
  SlotLimits out;
  auto cmp = [&](std::int64_t k, double hi, double lo) {
    return detail::exact_sign_scaled_minus_diff(static_cast<double>(k), u, hi, lo);
  };
  if (cmp(0, p.E_ref, p.E_init) < 0) {
    auto k = static_cast<std::int64_t>(std::ceil((p.E_ref - p.E_init) / u));
    while (k > 0 && cmp(k - 1, p.E_ref, p.E_init) >= 0) --k;
    while (cmp(k, p.E_ref, p.E_init) < 0) ++k;
    out.n_req = k;
  }
  if (cmp(0, p.E_max, p.E_init) <= 0) {
    auto k = static_cast<std::int64_t>(std::floor((p.E_max - p.E_init) / u));
    if (k < 0) k = 0;
    while (cmp(k + 1, p.E_max, p.E_init) <= 0) ++k;
    while (k > 0 && cmp(k, p.E_max, p.E_init) > 0) --k;
    out.k_max = k;
  } else {
    out.k_max = -1;
  }
  return out;
}

inline void validate_params(const EvAgentParams& p, std::size_t m) {
  if (!(p.P > 0.0)) throw std::invalid_argument("ev agent: P must be positive");
  if (!(p.delta > 0.0)) throw std::invalid_argument("ev agent: delta must be positive");
  if (!(p.xi > 0.0 && p.xi <= 1.0)) throw std::invalid_argument("ev agent: xi must lie in (0, 1]");
  if (!(p.E_init <= p.E_max)) throw InfeasibleAgent("ev agent: E_init exceeds E_max");
  const SlotLimits lim = slot_limits(p);
  const auto cap = std::min<std::int64_t>(lim.k_max, static_cast<std::int64_t>(m));
  if (lim.n_req > cap)
    throw InfeasibleAgent("ev agent: needs " + std::to_string(lim.n_req) + " slots but at most " +
                          std::to_string(cap) + " are allowed");
}

class EvAgent final : public AgentOracle {
 public:
  EvAgent(EvAgentParams params, std::shared_ptr<const Vec> tariff)
      : params_(params), tariff_(std::move(tariff)) {
    if (!tariff_ || tariff_->empty()) throw std::invalid_argument("ev agent: tariff must be nonempty");
    validate_params(params_, tariff_->size());
    const SlotLimits lim = slot_limits(params_);
    n_req_ = static_cast<std::size_t>(lim.n_req);
    k_cap_ = static_cast<std::size_t>(std::min<std::int64_t>(lim.k_max, static_cast<std::int64_t>(tariff_->size())));
  }

  std::string kind() const override { return "ev"; }
  std::size_t dimension() const override { return tariff_->size(); }
  std::size_t coupling_rows() const override { return tariff_->size(); }
  bool domain_is_convex() const override { return false; }

  const EvAgentParams& params() const { return params_; }
  const Vec& tariff() const { return *tariff_; }
  const std::shared_ptr<const Vec>& tariff_ptr() const { return tariff_; }
  std::size_t n_req() const { return n_req_; }
  std::size_t k_cap() const { return k_cap_; }

  /// Exact minimizer of sum_j w_j x_j over {x binary : n_req <= sum x <= k_cap}.
  /// Slots are taken in order of (w_j, j); all negative-weight slots are taken,
  /// clamped to the count limits.
  Vec greedy_select(std::span<const double> w) const {
    const std::size_t m = dimension();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
    const auto negatives = static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double v) { return v < 0.0; }));
    const std::size_t take = std::clamp(negatives, n_req_, k_cap_);
    Vec x(m, 0.0);
    for (std::size_t k = 0; k < take; ++k) x[order[k]] = 1.0;
    return x;
  }

  OracleAtom minimize(const OracleQuery& q) const override {
    const std::size_t m = dimension();
    Vec w(m);
    for (std::size_t j = 0; j < m; ++j) w[j] = q.gamma * params_.P * (*tariff_)[j] + q.lambda[j] * params_.P;
    return make_atom(greedy_select(w));
  }

  bool domain_contains(std::span<const double> x) const override {
    if (x.size() != dimension()) return false;
    std::size_t count = 0;
    for (double v : x) {
      if (v == 1.0) ++count;
      else if (v != 0.0) return false;
    }
    return count >= n_req_ && count <= k_cap_;
  }

  double cost(std::span<const double> x) const override {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += params_.P * (*tariff_)[j] * x[j];
    return acc;
  }

  Vec coupling(std::span<const double> x) const override {
    Vec out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = params_.P * x[j];
    return out;
  }

  /// sup f - inf f over the domain, each extreme found by the greedy.
  double nonconvexity_gamma() const {
    const std::size_t m = dimension();
    Vec w(m), neg_w(m);
    for (std::size_t j = 0; j < m; ++j) {
      w[j] = params_.P * (*tariff_)[j];
      neg_w[j] = -w[j];
    }
    return cost(greedy_select(neg_w)) - cost(greedy_select(w));
  }

  AgentBounds bounds(std::span<const double> b) const override {
    AgentBounds out;
    const std::size_t m = dimension();
    Vec dev(m);
    double tariff_abs = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      dev[j] = std::max(std::abs(params_.P - b[j]), std::abs(b[j]));
      tariff_abs += std::abs((*tariff_)[j]);
    }
    out.coupling_row_bound = norm2(dev);
    out.cost_bound = params_.P * tariff_abs;
    out.nonconvexity_gamma = nonconvexity_gamma();
    out.diameter_bound = std::sqrt(out.nonconvexity_gamma * out.nonconvexity_gamma +
                                   params_.P * params_.P * static_cast<double>(m));
    return out;
  }

 private:
  EvAgentParams params_;
  std::shared_ptr<const Vec> tariff_;
  std::size_t n_req_ = 0;
  std::size_t k_cap_ = 0;
};

/// Closed interval [lo, hi] used for sampling; lo == hi is a fixed value.
struct Range {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Range&, const Range&) = default;
};

struct EvInstanceConfig {
  std::size_t N = 100;
  std::size_t m = 24;
  std::uint64_t seed = 1;

  std::optional<double> P_max;  ///< network cap; defaults to P_max_fraction * sum_i P_i
  double P_max_fraction = 0.6;

  std::optional<Vec> tariff;  ///< explicit prices; otherwise generated below
  double tariff_base = 0.1;
  double tariff_amplitude = 0.5;
  double tariff_noise = 0.02;

  Range P{3.0, 5.0};
  Range xi{0.85, 1.0};
  double delta = 1.0;
  Range E_max{20.0, 40.0};
  Range E_init_fraction{0.2, 0.5};  ///< E_init = fraction * E_max
  Range E_ref_fraction{0.55, 0.8};  ///< E_ref = fraction * E_max

  std::size_t max_attempts = 1000;
};

struct EvInstanceData {
  std::vector<EvAgentParams> agents;
  Vec tariff;
  double P_max = 0.0;
};

inline void validate_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi)) throw std::invalid_argument(std::string("ev config: empty range for ") + name);
}

/// Deterministic draw of the benchmark parameters under config.seed.
inline EvInstanceData generate_ev_data(const EvInstanceConfig& cfg) {
  if (cfg.N == 0) throw std::invalid_argument("ev config: N must be positive");
  if (cfg.m == 0) throw std::invalid_argument("ev config: m must be positive");
  validate_range(cfg.P, "P");
  validate_range(cfg.xi, "xi");
  validate_range(cfg.E_max, "E_max");
  validate_range(cfg.E_init_fraction, "E_init_fraction");
  validate_range(cfg.E_ref_fraction, "E_ref_fraction");
  if (!(cfg.P.lo > 0.0)) throw std::invalid_argument("ev config: P range must be positive");
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("ev config: delta must be positive");
  if (!(cfg.xi.lo > 0.0 && cfg.xi.hi <= 1.0)) throw std::invalid_argument("ev config: xi range must lie in (0, 1]");

  Rng rng(cfg.seed);
  EvInstanceData out;
  if (cfg.tariff) {
    if (cfg.tariff->size() != cfg.m) throw std::invalid_argument("ev config: tariff length must equal m");
    out.tariff = *cfg.tariff;
  } else {
    out.tariff.resize(cfg.m);
    for (std::size_t j = 0; j < cfg.m; ++j) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(cfg.m);
      out.tariff[j] = cfg.tariff_base * (1.0 + cfg.tariff_amplitude * std::sin(phase)) +
                      rng.uniform(-cfg.tariff_noise, cfg.tariff_noise);
    }
  }

  out.agents.reserve(cfg.N);
  double p_sum = 0.0;
  for (std::size_t i = 0; i < cfg.N; ++i) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      EvAgentParams p;
      p.P = rng.uniform(cfg.P.lo, cfg.P.hi);
      p.xi = rng.uniform(cfg.xi.lo, cfg.xi.hi);
      p.delta = cfg.delta;
      p.E_max = rng.uniform(cfg.E_max.lo, cfg.E_max.hi);
      p.E_init = rng.uniform(cfg.E_init_fraction.lo, cfg.E_init_fraction.hi) * p.E_max;
      p.E_ref = rng.uniform(cfg.E_ref_fraction.lo, cfg.E_ref_fraction.hi) * p.E_max;
      if (!(p.E_init <= p.E_max)) continue;
      const SlotLimits lim = slot_limits(p);
      if (lim.n_req > std::min<std::int64_t>(lim.k_max, static_cast<std::int64_t>(cfg.m))) continue;
      out.agents.push_back(p);
      p_sum += p.P;
      accepted = true;
      break;
    }
    if (!accepted)
      throw InfeasibleAgent("ev config: agent " + std::to_string(i) + " infeasible after " +
                            std::to_string(cfg.max_attempts) + " consecutive draws");
  }
  out.P_max = cfg.P_max ? *cfg.P_max : cfg.P_max_fraction * p_sum;
  return out;
}

/// Maps the network cap sum_i P_i x_i <= P_max to (1/N) sum_i A_i x_i <= b with
/// A_i x = P_i x and b = P_max / N in every row.
inline Instance make_ev_instance(const EvInstanceData& data) {
  auto tariff = std::make_shared<const Vec>(data.tariff);
  std::vector<AgentPtr> agents;
  agents.reserve(data.agents.size());
  for (const EvAgentParams& p : data.agents) agents.push_back(std::make_shared<EvAgent>(p, tariff));
  Vec b(data.tariff.size(), data.P_max / static_cast<double>(data.agents.size()));
  return Instance(std::move(agents), std::move(b));
}

inline Instance generate_ev_instance(const EvInstanceConfig& cfg) { return make_ev_instance(generate_ev_data(cfg)); }

}  // namespace sepopt::ev

namespace sepopt::ev {

struct EvConstants {
  double G_tilde = 0.0;
  double H = 0.0;
  double D = 0.0;
};

/// Instance-level constants aggregated from the per-agent bounds.
inline EvConstants ev_constants(const Instance& inst) { return {inst.G_tilde(), inst.H(), inst.D()}; }

}  // namespace sepopt::ev
