#include "limes/cli.hpp"

#include "limes/bench.hpp"
#include "limes/csv.hpp"
#include "limes/errors.hpp"
#include "limes/problem_io.hpp"
#include "limes/solvers.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace limes::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  bool allow_nonconvex = false;
  std::optional<std::uint64_t> seed;
  std::string solver = "auto";
  bool quiet = false;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

json base_manifest(const std::string& command, const Options& opt) {
  return json{{"tool", "limes"},
              {"version", LIMES_VERSION},
              {"command", command},
              {"config", opt.config},
              {"overrides", opt.overrides},
              {"allow_nonconvex", opt.allow_nonconvex}};
}

// Splits overrides into problem-document keys and "solver." keys.
void split_overrides(const std::vector<std::string>& all, std::vector<std::string>& doc,
                     json& solver) {
  for (const auto& o : all) {
    if (o.rfind("solver.", 0) == 0) {
      apply_override(solver, o.substr(7));
    } else {
      doc.push_back(o);
    }
  }
}

SolverConfig solver_config(const json& j, bool allow_nonconvex) {
  SolverConfig c;
  c.allow_nonconvex = allow_nonconvex;
  for (const auto& [key, value] : j.items()) {
    auto number = [&]() {
      if (!value.is_number()) throw ConfigError("solver." + key + " must be a number");
      return value.get<double>();
    };
    if (key == "max_iter") {
      if (!value.is_number_integer()) throw ConfigError("solver.max_iter must be an integer");
      c.max_iter = value.get<int>();
    } else if (key == "rel_tol") {
      c.rel_tol = number();
    } else if (key == "step_beta") {
      c.step_beta = number();
    } else if (key == "tau") {
      c.tau = number();
    } else if (key == "sigma") {
      c.sigma = number();
    } else if (key == "relaxation") {
      c.relaxation = number();
    } else {
      throw ConfigError("unknown solver setting '" + key + "'");
    }
  }
  return c;
}

json closed_form_json(const LimesProblem& p) {
  const auto bound = closed_form_bound(p);
  if (!bound) return nullptr;
  return *bound;
}

void print_report(std::ostream& out, const LimesProblem& p, const ConvexityReport& r) {
  out << "application: " << to_string(p.application()) << '\n';
  const auto bound = closed_form_bound(p);
  if (bound) {
    const double value = p.application() == Application::spcp
                             ? p.params().mu_l + p.params().mu_s
                             : p.mu();
    out << "closed-form bound: " << csv::format_double(*bound)
        << (p.application() == Application::spcp ? " (on mu_L + mu_S = " : " (mu = ")
        << csv::format_double(value) << ")\n";
  } else {
    out << "closed-form bound: none\n";
  }
  out << "eigenvalue margin: " << csv::format_double(r.margin) << '\n';
  out << "tolerance: " << csv::format_double(r.tolerance) << '\n';
  out << "test: " << r.method << '\n';
  out << "necessary: " << (r.necessary ? "yes" : "no") << '\n';
  out << "convex: " << (r.satisfied ? "yes" : "no") << '\n';
}

int cmd_solve(const Options& opt, std::ostream& out) {
  if (opt.config.empty()) throw ConfigError("solve needs --config");
  json doc_json = read_json_file(opt.config);
  std::vector<std::string> doc_overrides;
  json solver_json = json::object();
  split_overrides(opt.overrides, doc_overrides, solver_json);
  for (const auto& o : doc_overrides) apply_override(doc_json, o);
  const ProblemDocument doc = problem_document_from_json(doc_json);
  const LimesProblem problem = doc.build();
  SolverConfig config = solver_config(solver_json, opt.allow_nonconvex);

  std::string solver = opt.solver;
  if (solver == "auto") solver = problem.type_s() ? "prox-grad" : "primal-dual";

  const ConvexityReport report = spade_check(problem);
  SolveResult result;
  if (solver == "prox-grad") {
    result = proximal_debiasing_gradient(problem, config);
  } else if (solver == "primal-dual") {
    result = primal_dual_debiasing(problem, config);
  } else if (solver == "ista") {
    if (!doc.a || !doc.y) throw ConfigError("the ista solver needs fields 'A' and 'y'");
    result = ista(*doc.a, *doc.y, doc.mu, config);
  } else {
    throw ConfigError("unknown solver '" + solver + "'");
  }

  const fs::path dir = prepare_out_dir(opt.out_dir);
  csv::write_vector(dir / "x.csv", result.x);
  {
    std::ofstream trace(dir / "trace.csv");
    if (!trace) throw InputError("cannot write trace.csv");
    trace << "iteration,objective,residual\n";
    for (std::size_t k = 0; k < result.objective_trace.size(); ++k) {
      trace << k << ',' << csv::format_double(result.objective_trace[k]) << ',';
      if (k > 0 && k - 1 < result.residual_trace.size()) {
        trace << csv::format_double(result.residual_trace[k - 1]);
      }
      trace << '\n';
    }
  }
  const double objective =
      solver == "ista" ? 0.5 * (*doc.a * result.x - *doc.y).squaredNorm() + doc.mu * result.x.lpNorm<1>()
                       : objective_eval(problem, result.x);
  const json summary = {{"objective", objective},
                        {"iterations", result.iterations},
                        {"converged", result.converged},
                        {"convexity_margin", report.margin},
                        {"global_guarantee", result.global_guarantee}};
  write_json_file(dir / "summary.json", summary);

  json manifest = base_manifest("solve", opt);
  manifest["problem"] = to_json(doc);
  manifest["solver"] = {{"name", solver},
                        {"max_iter", config.max_iter},
                        {"rel_tol", config.rel_tol},
                        {"relaxation", config.relaxation},
                        {"step_beta", result.step_beta},
                        {"tau", result.tau},
                        {"sigma", result.sigma}};
  manifest["lipschitz"] = problem.smooth_lipschitz();
  manifest["closed_form_bound"] = closed_form_json(problem);
  write_json_file(dir / "manifest.json", manifest);
  if (!opt.quiet) out << summary.dump(2) << '\n';
  return ok;
}

int cmd_check(const Options& opt, std::ostream& out) {
  if (opt.config.empty()) throw ConfigError("check needs --config");
  json doc_json = read_json_file(opt.config);
  for (const auto& o : opt.overrides) apply_override(doc_json, o);
  const LimesProblem problem = problem_document_from_json(doc_json).build();
  const ConvexityReport report = spade_check(problem);
  print_report(out, problem, report);
  return report.satisfied ? ok : not_convex;
}

int cmd_experiment(bench::ExperimentKind kind, const std::string& command, const Options& opt,
                   std::ostream& out) {
  json spec_json = opt.config.empty() ? json::object() : read_json_file(opt.config);
  if (!spec_json.is_object()) throw ConfigError("experiment config must be a JSON object");
  if (!spec_json.contains("experiment")) spec_json["experiment"] = bench::to_string(kind);
  for (const auto& o : opt.overrides) apply_override(spec_json, o);
  if (opt.seed) spec_json["master_seed"] = *opt.seed;
  bench::ExperimentSpec spec = bench::spec_from_json(spec_json);
  if (spec.experiment != kind) {
    throw ConfigError(command + " cannot run a '" + bench::to_string(spec.experiment) + "' spec");
  }
  const bench::ExperimentOutcome outcome = bench::run_experiment(spec);

  const fs::path dir = prepare_out_dir(opt.out_dir);
  {
    std::ofstream f(dir / "trials.csv");
    if (!f) throw InputError("cannot write trials.csv");
    bench::write_trials_csv(f, outcome);
  }
  {
    std::ofstream f(dir / "aggregate.csv");
    if (!f) throw InputError("cannot write aggregate.csv");
    bench::write_aggregate_csv(f, outcome);
  }
  json manifest = base_manifest(command, opt);
  manifest["spec"] = bench::to_json(spec);
  manifest["threads"] = outcome.threads;
  json seeds = json::array();
  for (int t = 0; t < spec.trials; ++t) seeds.push_back(bench::trial_seed(spec.master_seed, t));
  manifest["trial_seeds"] = seeds;
  int failures = 0;
  for (const auto& t : outcome.trials) failures += t.valid ? 0 : 1;
  manifest["failed_trials"] = failures;
  write_json_file(dir / "manifest.json", manifest);

  if (!opt.quiet) {
    out << std::left << std::setw(14) << "method" << std::setw(16) << "mean_mismatch"
        << std::setw(16) << "stderr" << "n_trials\n";
    for (const auto& row : outcome.aggregate) {
      out << std::left << std::setw(14) << row.method << std::setw(16)
          << csv::format_double(row.mean_mismatch) << std::setw(16)
          << csv::format_double(row.stderr_mismatch) << row.n_trials << '\n';
    }
  }
  return ok;
}

void add_common(CLI::App* sub, Options& opt, bool needs_config) {
  auto* c = sub->add_option("--config", opt.config, "JSON configuration file");
  if (needs_config) c->required();
  sub->add_option("--out", opt.out_dir, "output directory");
  sub->add_option("--set", opt.overrides, "override a configuration value, key=value");
  sub->add_flag("--allow-nonconvex", opt.allow_nonconvex, "run even if the convexity test fails");
  sub->add_flag("-q,--quiet", opt.quiet, "suppress the summary on standard output");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moreau-enhanced sparse and robust estimation", "limes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(LIMES_VERSION));
  Options opt;
  std::uint64_t seed = 0;

  auto* solve = app.add_subcommand("solve", "solve one problem document");
  add_common(solve, opt, true);
  solve->add_option("--solver", opt.solver, "prox-grad, primal-dual, ista or auto")
      ->check(CLI::IsMember({"auto", "prox-grad", "primal-dual", "ista"}));
  auto* check = app.add_subcommand("check", "report the convexity condition of a problem");
  add_common(check, opt, true);

  struct ExpCommand {
    const char* name;
    bench::ExperimentKind kind;
    const char* help;
  };
  const ExpCommand experiments[] = {
      {"exp-a", bench::ExperimentKind::exp_a, "sparse recovery with matched sparseness"},
      {"exp-b", bench::ExperimentKind::exp_b, "regression under gross outliers"},
      {"spcp", bench::ExperimentKind::spcp_demo, "low-rank plus sparse decomposition"},
      {"classify", bench::ExperimentKind::classify_demo, "hinge classification demo"},
  };
  std::vector<CLI::App*> exp_apps;
  for (const auto& e : experiments) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, opt, false);
    sub->add_option("--seed", seed, "master seed");
    exp_apps.push_back(sub);
  }

  std::vector<const char*> argv{"limes"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : invalid_config;
  }

  try {
    if (solve->parsed()) return cmd_solve(opt, out);
    if (check->parsed()) return cmd_check(opt, out);
    for (std::size_t i = 0; i < exp_apps.size(); ++i) {
      if (!exp_apps[i]->parsed()) continue;
      if (exp_apps[i]->count("--seed")) opt.seed = seed;
      return cmd_experiment(experiments[i].kind, experiments[i].name, opt, out);
    }
  } catch (const ConvexityError& e) {
    err << "error: " << e.what() << '\n';
    return not_convex;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return numerical_failure;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return invalid_config;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return invalid_config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return unexpected;
  }
  return unexpected;
}

}  // namespace limes::cli
