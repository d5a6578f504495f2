// sepopt: generate EV instances, run solvers, compare them at equal budgets.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sepopt/bracket.hpp"
#include "sepopt/experiment.hpp"
#include "sepopt/serialization.hpp"
#include "sepopt/verify.hpp"

namespace fs = std::filesystem;
using namespace sepopt;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> budget;
  std::string out;
  std::string algo = "two-stage";
};

int cmd_generate(const CommonFlags& f) {
  ev::EvInstanceConfig cfg;
  if (!f.config.empty()) {
    Json j = read_json_file(f.config);
    cfg = ev_config_from_json(j.contains("ev") ? j.at("ev") : j);
  }
  if (f.seed) cfg.seed = *f.seed;
  const Instance inst = ev::generate_ev_instance(cfg);
  const std::string text = instance_to_json(inst).dump(1) + "\n";
  if (f.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(f.out, text);
    std::cerr << "wrote " << inst.num_agents() << " agents, m = " << inst.num_rows() << " to " << f.out << "\n";
  }
  return 0;
}

ExperimentConfig load_experiment(const CommonFlags& f) {
  if (f.config.empty()) throw ConfigError("--config", "required");
  Json j = read_json_file(f.config);
  if (f.budget) j["budget"] = *f.budget;
  if (f.seed) j["seeds"] = Json::array({*f.seed});
  return experiment_config_from_json(j);
}

int cmd_solve(const CommonFlags& f, std::optional<double> lambda) {
  const auto algo = parse_algo(f.algo);
  if (!algo) throw ConfigError("--algo", "expected dsg, ssg or two-stage");
  ExperimentConfig cfg = load_experiment(f);
  const Instance inst = load_instance_spec(cfg.instance);
  const double L = lambda.value_or(cfg.lambda_grid.front());
  const std::uint64_t seed = cfg.seeds.front();
  RunOutcome r = run_algorithm(inst, *algo, cfg.budget, make_schedule(cfg.schedule, L, inst), seed, cfg.trace_points);
  const double d_ref = cfg.d_ref.value_or(r.best_dual);
  r.trace.config_digest = config_digest(cfg.source);
  r.trace.apply_reference(d_ref);

  Json report{{"algo", algo_name(*algo)},       {"Lambda", L},
              {"seed", seed},                   {"budget", cfg.budget},
              {"oracle_calls", r.calls},        {"d_ref", d_ref},
              {"cost", r.cost},                 {"gap_plus", r.gap_plus(d_ref)},
              {"infeasibility", r.infeasibility()}, {"metric", r.metric(d_ref)},
              {"config_digest", r.trace.config_digest}};
  if (r.sampled_cost) {
    report["sampled_cost"] = *r.sampled_cost;
    report["sampled_infeasibility"] = *r.sampled_infeasibility;
  }
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    write_text_file((fs::path(f.out) / trace_file_name(*algo, seed)).string(), trace_to_csv(r.trace));
    write_text_file((fs::path(f.out) / "result.json").string(), report.dump(2) + "\n");
  }
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_experiment(const CommonFlags& f) {
  const ExperimentConfig cfg = load_experiment(f);
  const Instance inst = load_instance_spec(cfg.instance);
  const ExperimentResult res = run_experiment(cfg, inst);
  if (!f.out.empty()) write_experiment(res, f.out);
  std::cout << summary_csv(res);
  return 0;
}

int cmd_verify(const CommonFlags& f, const std::string& suite) {
  Json params = Json::object();
  if (!f.config.empty()) params = read_json_file(f.config);
  std::vector<std::string> suites;
  if (suite == "all") suites = verify_suite_names();
  else suites.push_back(suite);
  Json out = Json::array();
  bool ok = true;
  for (const std::string& s : suites) {
    const Json p = params.contains(s) ? params.at(s) : params;
    const VerifyReport rep = run_verify_suite(s, p, f.seed.value_or(1));
    ok = ok && rep.pass();
    out.push_back(rep.to_json());
  }
  const std::string text = out.dump(2) + "\n";
  if (!f.out.empty()) write_text_file(f.out, text);
  std::cout << text;
  return ok ? 0 : 1;
}

int cmd_bracket(const CommonFlags& f, double delta, double radius) {
  if (f.config.empty()) throw ConfigError("--config", "required");
  Json j = read_json_file(f.config);
  const Instance inst = j.contains("instance") ? load_instance_spec(j.at("instance")) : instance_from_json(j);
  const DualReference ref = bracket_dual_optimum(inst, delta, radius);
  Json report{{"d_star_low", ref.d_star_low},
              {"d_star_high", ref.d_star_high},
              {"lambda_star_candidate", ref.lambda_star_candidate},
              {"method", ref.method},
              {"oracle_calls", ref.oracle_calls}};
  const std::string text = report.dump(2) + "\n";
  if (!f.out.empty()) write_text_file(f.out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"separable optimization with affine coupling: solvers and EV benchmark"};
  app.require_subcommand(1);
  CommonFlags f;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--seed", f.seed, "64-bit seed");
    sub->add_option("--out", f.out, "output file or directory");
  };

  auto* gen = app.add_subcommand("generate", "write an EV instance as JSON");
  add_common(gen);

  std::optional<double> lambda;
  auto* solve = app.add_subcommand("solve", "run one algorithm with one seed");
  add_common(solve);
  solve->add_option("--budget", f.budget, "oracle-call budget");
  solve->add_option("--algo", f.algo, "dsg, ssg or two-stage")->check(CLI::IsMember({"dsg", "ssg", "two-stage"}));
  solve->add_option("--lambda", lambda, "stepsize scale (default: first lambda_grid entry)");

  auto* exp = app.add_subcommand("experiment", "multi-seed comparison at a matched budget");
  add_common(exp);
  exp->add_option("--budget", f.budget, "oracle-call budget");

  std::string suite = "all";
  auto* ver = app.add_subcommand("verify", "run invariant suites");
  add_common(ver);
  ver->add_option("--suite", suite, "suite name or 'all'");

  double delta = 0.01, radius = 10.0;
  auto* br = app.add_subcommand("bracket", "bracket the dual optimum of a tiny instance");
  add_common(br);
  br->add_option("--delta", delta, "grid spacing");
  br->add_option("--radius", radius, "grid box radius");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(f);
    if (*solve) return cmd_solve(f, lambda);
    if (*exp) return cmd_experiment(f);
    if (*ver) return cmd_verify(f, suite);
    if (*br) return cmd_bracket(f, delta, radius);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
