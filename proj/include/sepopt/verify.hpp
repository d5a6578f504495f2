#pragma once

// Invariant suites with machine-readable reports.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sepopt/agents.hpp"
#include "sepopt/bcfw.hpp"
#include "sepopt/brute_force.hpp"
#include "sepopt/caratheodory.hpp"
#include "sepopt/ev.hpp"
#include "sepopt/rng.hpp"
#include "sepopt/serialization.hpp"
#include "sepopt/stochastic_subgradient.hpp"

namespace sepopt {

struct VerifyEntry {
  std::string name;
  bool pass = true;
  Json stats = Json::object();
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyEntry> entries;

  bool pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
  Json to_json() const {
    Json arr = Json::array();
    for (const auto& e : entries) arr.push_back(Json{{"name", e.name}, {"pass", e.pass}, {"stats", e.stats}});
    return Json{{"suite", suite}, {"pass", pass()}, {"entries", std::move(arr)}};
  }
};

/// Random feasible EV agent over m slots. Prices may be negative and are
/// sometimes quantized so that exact ties occur.
inline ev::EvAgent random_ev_agent(Rng& rng, std::size_t m) {
  ev::EvAgentParams p;
  p.P = rng.uniform(0.5, 5.0);
  p.delta = rng.uniform(0.25, 1.5);
  p.xi = rng.uniform(0.5, 1.0);
  const double u = ev::slot_energy(p);
  p.E_init = rng.uniform(0.0, 10.0);
  const auto k_max = static_cast<std::size_t>(rng.uniform_index(m + 3));
  const auto n_req = static_cast<std::size_t>(rng.uniform_index(std::min(k_max, m) + 1));
  p.E_max = p.E_init + (static_cast<double>(k_max) + 0.5) * u;
  p.E_ref = n_req == 0 ? p.E_init - 1.0 : p.E_init + (static_cast<double>(n_req) - 0.5) * u;
  const bool quantize = rng.uniform01() < 0.3;
  auto tariff = std::make_shared<Vec>(m);
  for (double& c : *tariff) {
    c = rng.uniform(-0.5, 1.0);
    if (quantize) c = std::round(c * 4.0) / 4.0;
  }
  return ev::EvAgent(p, tariff);
}

inline OracleQuery random_query(Rng& rng, std::size_t m, bool quantize = false) {
  OracleQuery q;
  q.gamma = rng.uniform01() < 0.2 ? 0.0 : rng.uniform(0.0, 2.0);
  q.lambda.resize(m);
  for (double& l : q.lambda) {
    l = rng.uniform(-2.0, 2.0);
    if (quantize) l = std::round(l * 4.0) / 4.0;
  }
  return q;
}

/// Greedy versus enumeration on random agents with 1 <= m <= max_m.
/// The error is relative to the larger of |optimum| and the l1 norm of the
/// slot weights, the natural scale of the summed objective.
inline VerifyEntry check_ev_oracle_fuzz(std::size_t cases, std::size_t max_m, std::uint64_t seed, bool fixed_m = false) {
  Rng rng(seed);
  VerifyEntry e{"greedy equals enumeration", true, {}};
  double worst = 0.0;
  std::size_t failures = 0, ties = 0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = fixed_m ? max_m : 1 + static_cast<std::size_t>(rng.uniform_index(max_m));
    const ev::EvAgent agent = random_ev_agent(rng, m);
    const OracleQuery q = random_query(rng, m, rng.uniform01() < 0.3);
    const OracleAtom g = agent.minimize(q);
    const OracleAtom b = brute_force_oracle(agent, q);
    const double vg = query_objective(g, q), vb = query_objective(b, q);
    double scale_w = 0.0;
    for (std::size_t j = 0; j < m; ++j) scale_w += std::abs(q.gamma * agent.params().P * agent.tariff()[j] + q.lambda[j] * agent.params().P);
    const double denom = std::max({std::abs(vb), scale_w, 1e-300});
    const double rel = std::abs(vg - vb) / denom;
    worst = std::max(worst, rel);
    if (!(rel <= 1e-12) || !agent.domain_contains(g.point)) ++failures;
    if (g.point != b.point) ++ties;
  }
  e.pass = failures == 0;
  e.stats = Json{{"cases", cases}, {"max_m", max_m}, {"worst_relative_error", worst}, {"failures", failures},
                 {"distinct_minimizers", ties}};
  return e;
}

/// domain_contains versus step-by-step energy simulation e_{j+1} = e_j + P delta xi x_j.
inline VerifyEntry check_ev_domain_fuzz(std::size_t cases, std::size_t max_m, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t mismatches = 0, accepted = 0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform_index(max_m));
    const ev::EvAgent agent = random_ev_agent(rng, m);
    Vec x(m);
    const double density = rng.uniform01();
    for (double& v : x) v = rng.uniform01() < density ? 1.0 : 0.0;
    const auto& p = agent.params();
    const double u = p.P * p.delta * p.xi;
    // Prefix simulation with integer slot counts, then one comparison per prefix.
    bool ok = true;
    std::size_t count = 0;
    for (std::size_t j = 0; j < m; ++j) {
      count += x[j] == 1.0 ? 1 : 0;
      if (std::fma(static_cast<double>(count), u, p.E_init - p.E_max) > 0.0) ok = false;
    }
    if (std::fma(static_cast<double>(count), u, p.E_init - p.E_ref) < 0.0) ok = false;
    if (ok) ++accepted;
    if (ok != agent.domain_contains(x)) ++mismatches;
  }
  VerifyEntry e{"domain check equals prefix simulation", mismatches == 0, {}};
  e.stats = Json{{"cases", cases}, {"mismatches", mismatches}, {"feasible", accepted}};
  return e;
}

/// max(a, 0) <= a + |c| whenever a >= c.
inline VerifyEntry check_max_inequality(std::size_t cases, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t failures = 0;
  double min_slack = INFINITY;
  for (std::size_t k = 0; k < cases; ++k) {
    double a = rng.uniform(-10.0, 10.0), c = rng.uniform(-10.0, 10.0);
    if (a < c) std::swap(a, c);
    const double slack = a + std::abs(c) - std::max(a, 0.0);
    min_slack = std::min(min_slack, slack);
    if (slack < 0.0) ++failures;
  }
  VerifyEntry e{"max(a,0) <= a + |c| for a >= c", failures == 0, {}};
  e.stats = Json{{"cases", cases}, {"failures", failures}, {"min_slack", min_slack}};
  return e;
}

/// N interval agents sharing one row; used where only the sampling matters.
inline Instance counter_instance(std::size_t n) {
  std::vector<AgentPtr> agents;
  for (std::size_t i = 0; i < n; ++i)
    agents.push_back(std::make_shared<BoxLinearAgent>(Vec{0.0}, Vec{1.0}, Vec{-1.0 - 0.1 * static_cast<double>(i)},
                                                      DenseMatrix::from_rows({{1.0}})));
  return Instance(std::move(agents), Vec{0.5});
}

struct ConcentrationStats {
  std::vector<double> mean_abs_dev;  ///< per agent, E|1/N - (I_i + 1)/(T - 1 + N)|
  std::vector<double> mean_count;    ///< per agent, E I_i
  std::vector<double> count_se;      ///< standard error of the count mean
  double bound = 0.0;                ///< (1/N) sqrt((N - 1)/T)
  std::size_t sum_violations = 0;    ///< runs with sum_i I_i != T - 1
};

inline ConcentrationStats concentration_stats(std::size_t n, std::size_t T, std::size_t seeds, std::uint64_t base_seed) {
  const Instance inst = counter_instance(n);
  ConcentrationStats s;
  s.mean_abs_dev.assign(n, 0.0);
  s.mean_count.assign(n, 0.0);
  s.count_se.assign(n, 0.0);
  std::vector<double> sq(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double denom = static_cast<double>(T - 1 + n);
  SsgOptions opts;
  opts.evaluate_d_bar = false;
  for (std::size_t r = 0; r < seeds; ++r) {
    const auto res = run_stochastic_dual_subgradient(inst, T, StepSchedule::diminishing(0.1), Vec{0.0}, base_seed + r, opts);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = static_cast<double>(res.counts[i]);
      total += res.counts[i];
      s.mean_abs_dev[i] += std::abs(inv_n - (c + 1.0) / denom);
      s.mean_count[i] += c;
      sq[i] += c * c;
    }
    if (total != T - 1) ++s.sum_violations;
  }
  const double k = static_cast<double>(seeds);
  for (std::size_t i = 0; i < n; ++i) {
    s.mean_abs_dev[i] /= k;
    s.mean_count[i] /= k;
    const double var = seeds > 1 ? (sq[i] - k * s.mean_count[i] * s.mean_count[i]) / (k - 1.0) : 0.0;
    s.count_se[i] = std::sqrt(std::max(var, 0.0) / k);
  }
  s.bound = inv_n * std::sqrt(static_cast<double>(n - 1) / static_cast<double>(T));
  return s;
}

inline std::vector<VerifyEntry> check_concentration(std::size_t n, std::size_t T, std::size_t seeds, std::uint64_t base_seed) {
  const ConcentrationStats s = concentration_stats(n, T, seeds, base_seed);
  double worst = 0.0;
  for (double v : s.mean_abs_dev) worst = std::max(worst, v);
  VerifyEntry moment{"E|1/N - (I_i+1)/(T-1+N)| <= (1/N) sqrt((N-1)/T)", worst <= s.bound, {}};
  moment.stats = Json{{"N", n}, {"T", T}, {"seeds", seeds}, {"worst_agent_mean", worst}, {"bound", s.bound}};

  const double p = 1.0 / static_cast<double>(n);
  const double expect = static_cast<double>(T - 1) * p;
  const double binom_se = std::sqrt(static_cast<double>(T - 1) * p * (1.0 - p) / static_cast<double>(seeds));
  double worst_z = 0.0;
  for (double mc : s.mean_count) worst_z = std::max(worst_z, std::abs(mc - expect) / binom_se);
  VerifyEntry law{"sum_i I_i = T-1 and E I_i = (T-1)/N within 4 standard errors", s.sum_violations == 0 && worst_z <= 4.0, {}};
  law.stats = Json{{"sum_violations", s.sum_violations}, {"expected_count", expect}, {"worst_z", worst_z}};
  return {moment, law};
}

/// Random ledgers over a generated EV instance, reduced and re-summed.
inline VerifyEntry check_caratheodory(const Instance& inst, std::size_t ledgers, std::size_t max_atoms, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = inst.num_agents(), m = inst.num_rows();
  double worst_rel = 0.0;
  std::size_t worst_excess = 0, failures = 0;
  for (std::size_t r = 0; r < ledgers; ++r) {
    AtomLedger ledger(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t atoms = 1 + static_cast<std::size_t>(rng.uniform_index(max_atoms));
      for (std::size_t l = 0; l < atoms; ++l) {
        const OracleQuery q = random_query(rng, m);
        ledger[i].add(rng.uniform(0.05, 1.0), inst.agent(i).minimize(q));
      }
      ledger[i].scale_weights(1.0 / ledger[i].weight_sum());
    }
    const LiftedPoint before = ledger_sum(ledger, m);
    const ReducedLedger red = reduce_conic_ledger(ledger, m);
    const LiftedPoint after = ledger_sum(red.ledger, m);
    const double scale_v = std::max(std::abs(before.beta), norm2(before.z));
    const double rel = std::max(std::abs(after.beta - before.beta), distance(after.z, before.z)) / scale_v;
    worst_rel = std::max(worst_rel, rel);
    const std::size_t excess = ledger_excess(red.ledger);
    worst_excess = std::max(worst_excess, excess);
    bool ok = excess <= m + 1 && rel <= 1e-9;
    try {
      validate_ledger(red.ledger, 1e-12);
    } catch (const std::exception&) {
      ok = false;
    }
    if (!ok) ++failures;
  }
  VerifyEntry e{"reduced ledger has excess <= m+1 and preserves (beta, z)", failures == 0, {}};
  e.stats = Json{{"ledgers", ledgers}, {"worst_relative_error", worst_rel}, {"worst_excess", worst_excess},
                 {"m", m}, {"failures", failures}};
  return e;
}

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"ev-oracle-fuzz", "ev-domain-fuzz", "max-inequality", "concentration",
                                              "caratheodory"};
  return names;
}

/// Runs one named suite. Parameters come from `params` with the defaults below.
inline VerifyReport run_verify_suite(const std::string& suite, const Json& params, std::uint64_t seed) {
  VerifyReport rep;
  rep.suite = suite;
  auto get = [&](const char* key, std::size_t fallback) {
    return params.contains(key) ? params.at(key).get<std::size_t>() : fallback;
  };
  if (suite == "ev-oracle-fuzz") {
    rep.entries.push_back(check_ev_oracle_fuzz(get("cases", 10000), get("m", 8), seed, true));
  } else if (suite == "ev-domain-fuzz") {
    rep.entries.push_back(check_ev_domain_fuzz(get("cases", 10000), get("m", 10), seed));
  } else if (suite == "max-inequality") {
    rep.entries.push_back(check_max_inequality(get("cases", 1000000), seed));
  } else if (suite == "concentration") {
    for (auto& e : check_concentration(get("N", 10), get("T", 100), get("seeds", 500), seed)) rep.entries.push_back(std::move(e));
  } else if (suite == "caratheodory") {
    ev::EvInstanceConfig c;
    c.N = get("N", 100);
    c.m = get("m", 24);
    c.seed = seed;
    const Instance inst = ev::generate_ev_instance(c);
    rep.entries.push_back(check_caratheodory(inst, get("ledgers", 20), get("atoms", 4), seed));
  } else {
    throw std::invalid_argument("unknown verify suite '" + suite + "'");
  }
  return rep;
}

}  // namespace sepopt
