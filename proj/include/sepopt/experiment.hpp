#pragma once

// Budget-matched multi-seed comparison of the baseline, stage 1 alone, and the
// two-stage pipeline, with a per-algorithm sweep over Lambda.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sepopt/dual_subgradient.hpp"
#include "sepopt/serialization.hpp"
#include "sepopt/stochastic_subgradient.hpp"
#include "sepopt/trace.hpp"
#include "sepopt/two_stage.hpp"

namespace sepopt {

enum class Algo { dsg, ssg, two_stage };

inline std::string algo_name(Algo a) {
  switch (a) {
    case Algo::dsg: return "dsg";
    case Algo::ssg: return "ssg";
    case Algo::two_stage: return "two-stage";
  }
  return "?";
}

inline std::optional<Algo> parse_algo(const std::string& s) {
  if (s == "dsg") return Algo::dsg;
  if (s == "ssg") return Algo::ssg;
  if (s == "two-stage") return Algo::two_stage;
  return std::nullopt;
}

/// Iteration counts that spend exactly (or at most) B oracle calls.
struct BudgetSplit {
  std::size_t T = 0;
  std::size_t K = 0;
  std::uint64_t calls = 0;
};

inline BudgetSplit split_budget(Algo algo, std::uint64_t B, std::size_t n) {
  BudgetSplit s;
  switch (algo) {
    case Algo::dsg:
      s.T = static_cast<std::size_t>(B / n);
      if (s.T < 1) throw std::invalid_argument("budget too small for one full subgradient step");
      s.calls = s.T * n;
      break;
    case Algo::ssg:
      if (B + 1 < n + 2) throw std::invalid_argument("budget too small for stage 1");
      s.T = static_cast<std::size_t>(B - n + 1);
      s.calls = (s.T - 1) + n;
      break;
    case Algo::two_stage: {
      // (T - 1) + N + N + K = B with T = floor((B - 2N + 1) / 2), K taking the rest.
      if (B + 1 < 2 * n + 4) throw std::invalid_argument("budget too small for the two-stage pipeline");
      const std::uint64_t room = B - 2 * n + 1;
      s.T = static_cast<std::size_t>(room / 2);
      s.K = static_cast<std::size_t>(room - s.T);
      s.calls = (s.T - 1) + 2 * n + s.K;
      break;
    }
  }
  return s;
}

/// Derives independent stream seeds from one run seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct ExperimentConfig {
  Json instance;  ///< {"ev": {...}}, {"file": path} or an inline instance document
  std::uint64_t budget = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<Algo> algorithms{Algo::dsg, Algo::ssg, Algo::two_stage};
  StepSchedule::Kind schedule = StepSchedule::Kind::diminishing;
  std::vector<double> lambda_grid{0.01, 0.1, 1.0, 10.0};
  std::size_t trace_points = 200;
  std::optional<double> d_ref;
  Json source;  ///< the validated document, for the digest
};

inline ExperimentConfig experiment_config_from_json(const Json& j) {
  const std::string root = "config";
  if (!j.is_object()) throw ConfigError(root, "expected an object");
  ExperimentConfig c;
  if (!j.contains("instance")) throw ConfigError(root + ".instance", "missing");
  c.instance = j.at("instance");
  if (!c.instance.is_object()) throw ConfigError(root + ".instance", "expected an object");
  c.budget = detail::get_field<std::uint64_t>(j, "budget", root);
  if (c.budget == 0) throw ConfigError(root + ".budget", "must be positive");
  c.seeds = detail::get_field<std::vector<std::uint64_t>>(j, "seeds", root);
  if (c.seeds.empty()) throw ConfigError(root + ".seeds", "at least one seed is required");
  if (j.contains("algorithms")) {
    const auto names = detail::get_field<std::vector<std::string>>(j, "algorithms", root);
    if (names.empty()) throw ConfigError(root + ".algorithms", "must be nonempty");
    c.algorithms.clear();
    for (std::size_t k = 0; k < names.size(); ++k) {
      auto a = parse_algo(names[k]);
      if (!a) throw ConfigError(root + ".algorithms[" + std::to_string(k) + "]", "unknown algorithm '" + names[k] + "'");
      c.algorithms.push_back(*a);
    }
  }
  const auto sched = detail::get_or<std::string>(j, "schedule", root, "diminishing");
  if (sched == "diminishing") c.schedule = StepSchedule::Kind::diminishing;
  else if (sched == "constant") c.schedule = StepSchedule::Kind::constant;
  else throw ConfigError(root + ".schedule", "expected 'diminishing' or 'constant'");
  if (j.contains("lambda_grid")) c.lambda_grid = detail::get_field<std::vector<double>>(j, "lambda_grid", root);
  if (c.lambda_grid.empty()) throw ConfigError(root + ".lambda_grid", "must be nonempty");
  for (std::size_t k = 0; k < c.lambda_grid.size(); ++k)
    if (!(c.lambda_grid[k] > 0.0)) throw ConfigError(root + ".lambda_grid[" + std::to_string(k) + "]", "must be positive");
  c.trace_points = detail::get_or<std::size_t>(j, "trace_points", root, c.trace_points);
  if (c.trace_points == 0) throw ConfigError(root + ".trace_points", "must be positive");
  if (j.contains("d_ref")) c.d_ref = detail::get_field<double>(j, "d_ref", root);
  c.source = j;
  return c;
}

inline Instance load_instance_spec(const Json& spec, const std::string& path = "config.instance") {
  if (spec.contains("ev")) return ev::generate_ev_instance(ev_config_from_json(spec.at("ev"), path + ".ev"));
  if (spec.contains("file")) return instance_from_json(read_json_file(detail::get_field<std::string>(spec, "file", path)), path);
  return instance_from_json(spec, path);
}

struct RunOutcome {
  Algo algo = Algo::dsg;
  double Lambda = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t calls = 0;
  double cost = 0.0;  ///< bidual cost of the returned combination
  Vec residual;
  double best_dual = -std::numeric_limits<double>::infinity();
  std::optional<double> sampled_cost;  ///< two-stage: cost of the reconstructed point
  std::optional<double> sampled_infeasibility;
  RunTrace trace;

  double gap_plus(double d_ref) const { return std::max(cost - d_ref, 0.0); }
  double infeasibility() const { return plus_norm(residual); }
  double metric(double d_ref) const { return gap_plus(d_ref) + infeasibility(); }
};

inline StepSchedule make_schedule(StepSchedule::Kind kind, double Lambda, const Instance& inst) {
  return kind == StepSchedule::Kind::constant ? StepSchedule::constant(Lambda, inst.G_tilde())
                                              : StepSchedule::diminishing(Lambda);
}

inline RunOutcome run_algorithm(const Instance& inst, Algo algo, std::uint64_t budget, const StepSchedule& schedule,
                                std::uint64_t seed, std::size_t trace_points) {
  const std::size_t n = inst.num_agents();
  const Vec lambda0(inst.num_rows(), 0.0);
  const BudgetSplit split = split_budget(algo, budget, n);
  RunOutcome out;
  out.algo = algo;
  out.Lambda = schedule.Lambda;
  out.seed = seed;
  switch (algo) {
    case Algo::dsg: {
      SubgradOptions o;
      o.trace_stride = std::max<std::size_t>(1, split.T / trace_points);
      auto r = run_dual_subgradient(inst, split.T, schedule, lambda0, o);
      out.calls = r.oracle_calls;
      out.cost = r.primal_cost;
      out.residual = r.residual;
      out.best_dual = r.best_dual;
      out.trace = std::move(r.trace);
      break;
    }
    case Algo::ssg: {
      SsgOptions o;
      o.evaluate_d_bar = false;
      auto r = run_stochastic_dual_subgradient(inst, split.T, schedule, lambda0, seed, o);
      out.calls = r.oracle_calls;
      out.cost = r.primal_cost;
      out.residual = r.residual;
      out.best_dual = r.best_dual;
      out.trace = std::move(r.trace);
      break;
    }
    case Algo::two_stage: {
      TwoStageConfig tc;
      tc.T = split.T;
      tc.K = split.K;
      tc.schedule = schedule;
      tc.mode = TwoStageMode::nonconvex;
      tc.seed_stage1 = seed;
      tc.seed_stage2 = derive_seed(seed, 1);
      tc.seed_sampling = derive_seed(seed, 2);
      tc.stage2_trace_stride = std::max<std::size_t>(1, split.K / trace_points);
      auto r = run_two_stage_nonconvex(inst, tc);
      out.calls = r.calls.total;
      out.cost = r.beta_K;
      out.residual = subtract(r.z_K, inst.b());
      out.best_dual = r.stage1.best_dual;
      out.sampled_cost = r.cost;
      out.sampled_infeasibility = r.infeasibility;
      out.trace = std::move(r.trace);
      break;
    }
  }
  out.trace.seed = seed;
  return out;
}

struct LambdaStats {
  double Lambda = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct AlgoSummary {
  Algo algo = Algo::dsg;
  double best_Lambda = 0.0;
  double mean_metric = 0.0;
  double std_metric = 0.0;
  double mean_gap_plus = 0.0;
  double mean_infeasibility = 0.0;
  std::optional<double> mean_sampled_metric;
  std::vector<LambdaStats> sweep;
  std::vector<RunOutcome> runs;  ///< runs at best_Lambda, in seed order
};

struct ExperimentResult {
  double d_ref = 0.0;
  std::string digest;
  std::size_t num_agents = 0;
  std::size_t num_rows = 0;
  std::uint64_t budget = 0;
  std::vector<AlgoSummary> algorithms;

  const AlgoSummary* find(Algo a) const {
    for (const auto& s : algorithms)
      if (s.algo == a) return &s;
    return nullptr;
  }
};

inline std::pair<double, double> mean_and_sample_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// d_ref is the largest dual value observed across every run unless the config
/// supplies one; Lambda is then chosen per algorithm by the mean metric.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Instance& inst) {
  ExperimentResult res;
  res.digest = config_digest(cfg.source);
  res.num_agents = inst.num_agents();
  res.num_rows = inst.num_rows();
  res.budget = cfg.budget;

  std::map<std::pair<Algo, double>, std::vector<RunOutcome>> runs;
  double best_dual = -std::numeric_limits<double>::infinity();
  for (Algo algo : cfg.algorithms)
    for (double L : cfg.lambda_grid) {
      const StepSchedule sched = make_schedule(cfg.schedule, L, inst);
      auto& bucket = runs[{algo, L}];
      for (std::uint64_t seed : cfg.seeds) {
        bucket.push_back(run_algorithm(inst, algo, cfg.budget, sched, seed, cfg.trace_points));
        best_dual = std::max(best_dual, bucket.back().best_dual);
      }
    }
  res.d_ref = cfg.d_ref.value_or(best_dual);

  for (Algo algo : cfg.algorithms) {
    AlgoSummary s;
    s.algo = algo;
    double best_mean = std::numeric_limits<double>::infinity();
    for (double L : cfg.lambda_grid) {
      std::vector<double> metrics;
      for (const RunOutcome& r : runs[{algo, L}]) metrics.push_back(r.metric(res.d_ref));
      const auto [mean, sd] = mean_and_sample_std(metrics);
      s.sweep.push_back({L, mean, sd});
      if (mean < best_mean) {
        best_mean = mean;
        s.best_Lambda = L;
        s.mean_metric = mean;
        s.std_metric = sd;
      }
    }
    s.runs = runs[{algo, s.best_Lambda}];
    std::vector<double> gaps, infs, sampled;
    for (RunOutcome& r : s.runs) {
      r.trace.config_digest = res.digest;
      r.trace.apply_reference(res.d_ref);
      gaps.push_back(r.gap_plus(res.d_ref));
      infs.push_back(r.infeasibility());
      if (r.sampled_cost) sampled.push_back(std::max(*r.sampled_cost - res.d_ref, 0.0) + *r.sampled_infeasibility);
    }
    s.mean_gap_plus = mean_and_sample_std(gaps).first;
    s.mean_infeasibility = mean_and_sample_std(infs).first;
    if (!sampled.empty()) s.mean_sampled_metric = mean_and_sample_std(sampled).first;
    res.algorithms.push_back(std::move(s));
  }
  return res;
}

inline std::string format_number(double v) { return detail::format_double(v); }

inline std::string summary_csv(const ExperimentResult& res) {
  std::ostringstream os;
  os << "# sepopt-summary v1\n# config_digest=" << res.digest << "\n# d_ref=" << format_number(res.d_ref) << '\n';
  os << "algo,Lambda,budget,runs,mean_metric,std_metric,mean_gap_plus,mean_infeasibility,mean_sampled_metric\n";
  for (const AlgoSummary& s : res.algorithms) {
    os << algo_name(s.algo) << ',' << format_number(s.best_Lambda) << ',' << res.budget << ',' << s.runs.size() << ','
       << format_number(s.mean_metric) << ',' << format_number(s.std_metric) << ',' << format_number(s.mean_gap_plus)
       << ',' << format_number(s.mean_infeasibility) << ','
       << (s.mean_sampled_metric ? format_number(*s.mean_sampled_metric) : std::string()) << '\n';
  }
  return os.str();
}

inline std::string sweep_csv(const ExperimentResult& res) {
  std::ostringstream os;
  os << "algo,Lambda,mean_metric,std_metric\n";
  for (const AlgoSummary& s : res.algorithms)
    for (const LambdaStats& l : s.sweep)
      os << algo_name(s.algo) << ',' << format_number(l.Lambda) << ',' << format_number(l.mean) << ','
         << format_number(l.stddev) << '\n';
  return os.str();
}

/// One row per trace record carrying a metric: algo, seed, calls, metric.
inline std::string long_csv(const ExperimentResult& res) {
  std::ostringstream os;
  os << "algo,seed,oracle_calls,phase,metric\n";
  for (const AlgoSummary& s : res.algorithms)
    for (const RunOutcome& r : s.runs)
      for (const TraceRecord& t : r.trace.records)
        if (t.gap_plus && t.infeasibility)
          os << algo_name(s.algo) << ',' << r.seed << ',' << t.oracle_calls << ',' << phase_name(t.phase) << ','
             << format_number(*t.gap_plus + *t.infeasibility) << '\n';
  return os.str();
}

inline std::string trace_file_name(Algo a, std::uint64_t seed) {
  return "trace_" + algo_name(a) + "_seed" + std::to_string(seed) + ".csv";
}

inline void write_experiment(const ExperimentResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file((dir / "summary.csv").string(), summary_csv(res));
  write_text_file((dir / "lambda_sweep.csv").string(), sweep_csv(res));
  write_text_file((dir / "metrics_long.csv").string(), long_csv(res));
  for (const AlgoSummary& s : res.algorithms)
    for (const RunOutcome& r : s.runs) write_text_file((dir / trace_file_name(s.algo, r.seed)).string(), trace_to_csv(r.trace));
}

/// Least-squares slope of log(metric) against log(oracle_calls) over the
/// second half (by record index) of the records in `phase` with a positive metric.
inline std::optional<double> loglog_slope(const RunTrace& trace, Phase phase) {
  std::vector<std::pair<double, double>> pts;
  for (const TraceRecord& r : trace.records) {
    if (r.phase != phase || !r.gap_plus || !r.infeasibility || r.oracle_calls == 0) continue;
    pts.emplace_back(static_cast<double>(r.oracle_calls), *r.gap_plus + *r.infeasibility);
  }
  const std::size_t start = pts.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t k = start; k < pts.size(); ++k) {
    if (!(pts[k].second > 0.0)) continue;
    const double x = std::log(pts[k].first), y = std::log(pts[k].second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::nullopt;
  const double dn = static_cast<double>(n);
  const double den = sxx - sx * sx / dn;
  if (den <= 0.0) return std::nullopt;
  return (sxy - sx * sy / dn) / den;
}

}  // namespace sepopt
