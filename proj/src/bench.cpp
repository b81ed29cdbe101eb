#include "limes/bench.hpp"

#include "limes/csv.hpp"
#include "limes/errors.hpp"
#include "limes/problem.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <thread>

namespace limes::bench {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string>& known_methods(ExperimentKind kind) {
  static const std::vector<std::string> a = {"ols", "lasso", "pmc", "mc"};
  static const std::vector<std::string> b = {"sorr", "orr", "huber", "lad_ridge", "ols", "ridge"};
  static const std::vector<std::string> spcp = {"spcp", "tsvd"};
  static const std::vector<std::string> cls = {"limes_hinge"};
  switch (kind) {
    case ExperimentKind::exp_a: return a;
    case ExperimentKind::exp_b: return b;
    case ExperimentKind::spcp_demo: return spcp;
    case ExperimentKind::classify_demo: return cls;
  }
  return a;
}

void check_grid(const std::vector<double>& grid, const char* name, bool allow_empty = false) {
  if (grid.empty() && !allow_empty) throw ConfigError(std::string("tuning.") + name + " is empty");
  for (double g : grid) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw ConfigError(std::string("tuning.") + name + " entries must be finite and > 0");
    }
  }
}

Vector gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  // Row by row so the draw order is independent of the storage order.
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

// First k entries of a uniformly random permutation of 0..n-1.
std::vector<Index> random_subset(Index n, Index k, std::mt19937_64& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Scales noise so that |signal|^2 / |noise|^2 = 10^(snr_db / 10).
Vector scaled_noise(const Vector& signal, std::optional<double> snr_db, std::mt19937_64& rng) {
  Vector noise = gaussian_vector(signal.size(), rng);
  if (!snr_db || signal.squaredNorm() == 0.0) return Vector::Zero(signal.size());
  const double ratio = std::pow(10.0, *snr_db / 10.0);
  noise *= std::sqrt(signal.squaredNorm() / (ratio * noise.squaredNorm()));
  return noise;
}

struct Timer {
  bool enabled;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    if (!enabled) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

SolverConfig inner_config(const TuningSpec& t) {
  SolverConfig c;
  c.rel_tol = t.rel_tol;
  c.max_iter = t.max_iter;
  c.record_trace = false;
  c.verify_convexity = false;
  return c;
}

TrialResult invalid(int trial, const std::string& method, const std::string& note) {
  TrialResult r;
  r.trial = trial;
  r.method = method;
  r.mismatch = kNaN;
  r.sparseness = kNaN;
  r.valid = false;
  r.note = note;
  return r;
}

// Sparseness-matched PMC or MC: the best alpha by mismatch.
TrialResult run_debiased(const ExperimentSpec& spec, int trial, const SparseModel& data,
                         const DesignSpectra& spectra, double target, double mu_hi, bool projective) {
  const std::string name = projective ? "pmc" : "mc";
  const double lmin = spectra.lambda_min_pp;
  SolverConfig cfg = inner_config(spec.tuning);
  cfg.allow_nonconvex = !projective;
  std::optional<TrialResult> best;
  for (double alpha : spec.tuning.alpha_grid) {
    auto build = [&](double mu) {
      const double gamma = mu / (alpha * lmin);
      return projective ? make_pmc(data.a, data.y, mu, gamma, spectra)
                        : make_mc(data.a, data.y, mu, gamma);
    };
    const SparseSolveFn solve = [&](double mu, const std::optional<Vector>& warm) {
      return proximal_debiasing_gradient(build(mu), cfg, warm);
    };
    const TuneOutcome tuned = tune_mu_to_sparseness(solve, spec.tuning.mu_lo_factor * mu_hi, mu_hi,
                                                    target, spec.tuning);
    if (!tuned.ok) continue;
    TrialResult r;
    r.trial = trial;
    r.method = name;
    r.mu = tuned.mu;
    r.gamma = tuned.mu / (alpha * lmin);
    r.mismatch = system_mismatch(data.x, tuned.result.x);
    r.sparseness = tuned.sparseness;
    r.iterations = tuned.result.iterations;
    r.note = tuned.note;
    if (!best || r.mismatch < best->mismatch) best = r;
  }
  if (!best) return invalid(trial, name, "sparseness tuning failed for every alpha");
  if (projective) {
    const ConvexityReport report = spade_check(make_pmc(data.a, data.y, best->mu, best->gamma, spectra));
    if (!report.satisfied) return invalid(trial, name, "convexity check failed");
  }
  return *best;
}


std::vector<TrialResult> trial_exp_a(const ExperimentSpec& spec, int trial) {
  const SparseModel data = gen_sparse_model(spec, trial);
  const DesignSpectra spectra = analyze_design(data.a);
  const double target = hoyer_sparseness(data.x);
  const double mu_hi = 1.01 * (data.a.transpose() * data.y).lpNorm<Eigen::Infinity>();
  std::vector<TrialResult> out;
  for (const auto& method : spec.methods) {
    const Timer timer{spec.timing};
    TrialResult r;
    if (method == "ols") {
      const Vector x = baseline_ols(data.a, data.y);
      r.trial = trial;
      r.method = method;
      r.mismatch = system_mismatch(data.x, x);
      r.sparseness = hoyer_sparseness(x);
    } else if (method == "lasso") {
      if (!(mu_hi > 0.0)) {
        r = invalid(trial, method, "A^T y = 0");
      } else {
        const SolverConfig cfg = inner_config(spec.tuning);
        const SparseSolveFn solve = [&](double mu, const std::optional<Vector>& warm) {
          return ista(data.a, data.y, mu, spectra.lambda_max, cfg, warm);
        };
        const TuneOutcome tuned =
            tune_mu_to_sparseness(solve, spec.tuning.mu_lo_factor * mu_hi, mu_hi, target, spec.tuning);
        if (!tuned.ok) {
          r = invalid(trial, method, tuned.note);
        } else {
          r.trial = trial;
          r.method = method;
          r.mu = tuned.mu;
          r.mismatch = system_mismatch(data.x, tuned.result.x);
          r.sparseness = tuned.sparseness;
          r.iterations = tuned.result.iterations;
          r.note = tuned.note;
        }
      }
    } else if (!(mu_hi > 0.0)) {
      r = invalid(trial, method, "A^T y = 0");
    } else {
      r = run_debiased(spec, trial, data, spectra, target, mu_hi, method == "pmc");
    }
    r.wallclock_ms = timer.ms();
    out.push_back(std::move(r));
  }
  return out;
}

struct GridBest {
  double mismatch = std::numeric_limits<double>::infinity();
  double mu = 0.0;
  double gamma = 0.0;
  Vector x;
  int iterations = 0;
};

void consider(GridBest& best, const Vector& x_true, const Vector& x, double mu, double gamma,
              int iterations) {
  const double mm = system_mismatch(x_true, x);
  if (mm < best.mismatch) best = GridBest{mm, mu, gamma, x, iterations};
}

std::vector<TrialResult> trial_exp_b(const ExperimentSpec& spec, int trial) {
  const OutlierModel data = gen_outlier_model(spec, trial);
  const Index n = data.a.cols();
  const Index m = data.a.rows();
  DesignSpectra spectra;
  spectra.lambda_max = lambda_max_gram(data.a);
  const TuningSpec& t = spec.tuning;
  const SolverConfig cfg = inner_config(t);
  // Oracle noise level, as realized.
  const double sigma_eps = std::sqrt(std::max(data.noise.squaredNorm() / static_cast<double>(m),
                                              std::numeric_limits<double>::min()));
  const double sigma_x = 1.0;

  std::vector<TrialResult> out;
  for (const auto& method : spec.methods) {
    const Timer timer{spec.timing};
    GridBest best;
    if (method == "ols") {
      consider(best, data.x, baseline_ols(data.a, data.y), 0.0, 0.0, 0);
    } else if (method == "ridge") {
      for (double lambda : t.lambda_grid) {
        consider(best, data.x, baseline_ridge(data.a, data.y, lambda), lambda, 0.0, 0);
      }
    } else if (method == "sorr") {
      const double denom = sigma_eps * sigma_eps + sigma_x * sigma_x * spectra.lambda_max;
      for (double gamma : t.gamma_grid) {
        for (double frac : t.bound_fraction_grid) {
          const double mu = frac * gamma / denom;
          const auto res = primal_dual_debiasing(
              make_sorr(data.a, data.y, sigma_x, sigma_eps, mu, gamma, spectra), cfg);
          consider(best, data.x, res.x.head(n), mu, gamma, res.iterations);
        }
      }
    } else if (method == "orr") {
      for (double gamma : t.gamma_grid) {
        for (double frac : t.bound_fraction_grid) {
          const double mu = frac * gamma / spectra.lambda_max;
          const auto res = primal_dual_debiasing(make_orr(data.a, data.y, mu, gamma, spectra), cfg);
          consider(best, data.x, res.x, mu, gamma, res.iterations);
        }
      }
    } else if (method == "huber") {
      for (double gamma : t.huber_gamma_grid) {
        for (double lambda : t.lambda_grid) {
          const auto res = baseline_huber(data.a, data.y, gamma, lambda, cfg, spectra.lambda_max);
          consider(best, data.x, res.x, lambda, gamma, res.iterations);
        }
      }
    } else if (method == "lad_ridge") {
      for (double lambda : t.lambda_grid) {
        const auto res = primal_dual_debiasing(make_lad_ridge(data.a, data.y, lambda, spectra), cfg);
        consider(best, data.x, res.x, lambda, 0.0, res.iterations);
      }
    }
    TrialResult r;
    r.trial = trial;
    r.method = method;
    r.mu = best.mu;
    r.gamma = best.gamma;
    r.mismatch = best.mismatch;
    r.sparseness = best.x.size() ? hoyer_sparseness(best.x) : kNaN;
    r.iterations = best.iterations;
    r.wallclock_ms = timer.ms();
    if (!std::isfinite(r.mismatch)) {
      r.valid = false;
      r.note = "no finite grid result";
    }
    out.push_back(std::move(r));
  }
  return out;
}

Vector flatten_row_major(const Matrix& m) {
  Vector v(m.size());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  }
  return v;
}

std::vector<TrialResult> trial_spcp(const ExperimentSpec& spec, int trial) {
  const SpcpModel data = gen_spcp_model(spec.n, spec.m, spec.rank, spec.outlier_density,
                                        spec.noise_sigma, trial_seed(spec.master_seed, trial),
                                        spec.sparse_scale);
  const Vector truth = flatten_row_major(data.low_rank);
  const Index k = data.y.size();
  std::vector<TrialResult> out;
  for (const auto& method : spec.methods) {
    const Timer timer{spec.timing};
    TrialResult r;
    r.trial = trial;
    r.method = method;
    if (truth.squaredNorm() == 0.0) {
      r = invalid(trial, method, "zero low-rank component");
    } else if (method == "tsvd") {
      const Matrix l_hat = truncated_svd(data.y, spec.rank);
      r.mismatch = system_mismatch(truth, flatten_row_major(l_hat));
      r.sparseness = hoyer_sparseness(flatten_row_major(data.y - l_hat));
    } else {
      // Every grid point sits on the convexity bound; the winner is re-checked below.
      SolverConfig cfg = inner_config(spec.tuning);
      cfg.verify_convexity = false;
      cfg.max_iter = spec.tuning.spcp_max_iter;
      GridBest best;
      double best_mu_s = 0.0;
      for (double mu_l : spec.tuning.spcp_mu_grid) {
        for (double mu_s : spec.tuning.spcp_mu_grid) {
          const double gamma = (mu_l + mu_s) / 4.0;
          const auto res =
              proximal_debiasing_gradient(make_spcp(data.y, mu_l, mu_s, gamma), cfg);
          const double mm = system_mismatch(truth, res.x.head(k));
          if (mm < best.mismatch) {
            best = GridBest{mm, mu_l, gamma, res.x, res.iterations};
            best_mu_s = mu_s;
          }
        }
      }
      r.mu = best.mu;
      r.gamma = best.gamma;
      r.mismatch = best.mismatch;
      r.sparseness = best.x.size() ? hoyer_sparseness(best.x.tail(k)) : kNaN;
      r.iterations = best.iterations;
      if (!spade_check(make_spcp(data.y, best.mu, best_mu_s, best.gamma)).satisfied) {
        throw NumericalError("spcp: selected configuration failed the convexity check");
      }
      r.note = "mu_S=" + csv::format_double(best_mu_s);
    }
    r.wallclock_ms = timer.ms();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrialResult> trial_classify(const ExperimentSpec& spec, int trial) {
  const ClassifyModel data = gen_classify_model(spec.m, spec.n, trial_seed(spec.master_seed, trial));
  std::vector<TrialResult> out;
  for (const auto& method : spec.methods) {
    const Timer timer{spec.timing};
    const double gamma = spec.tuning.classify_gamma;
    const Matrix m2 = classification_operator(data.samples, data.labels);
    const double mu = spec.tuning.bound_fraction_grid.back() * convexity_bound_classify(m2, gamma);
    const auto res = primal_dual_debiasing(make_classify(data.samples, data.labels, mu, gamma),
                                           inner_config(spec.tuning));
    const Vector margins = m2 * res.x;
    const double correct = static_cast<double>((margins.array() > 0.0).count());
    TrialResult r;
    r.trial = trial;
    r.method = method;
    r.mu = mu;
    r.gamma = gamma;
    r.mismatch = 1.0 - correct / static_cast<double>(spec.m);
    r.sparseness = hoyer_sparseness(res.x);
    r.iterations = res.iterations;
    r.wallclock_ms = timer.ms();
    out.push_back(std::move(r));
  }
  return out;
}

void read_grid(const json& t, const char* key, std::vector<double>& grid) {
  if (!t.contains(key)) return;
  const json& v = t.at(key);
  if (!v.is_array()) throw ConfigError(std::string("tuning.") + key + " must be an array");
  grid.clear();
  for (const auto& g : v) {
    if (!g.is_number()) throw ConfigError(std::string("tuning.") + key + " must hold numbers");
    grid.push_back(g.get<double>());
  }
}

template <typename T>
void read_number(const json& j, const char* key, T& out, const char* scope) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) {
      throw ConfigError(std::string(scope) + key + " must be an integer");
    }
    out = v.get<T>();
  } else {
    if (!v.is_number()) throw ConfigError(std::string(scope) + key + " must be a number");
    out = v.get<T>();
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::exp_a: return "exp_a";
    case ExperimentKind::exp_b: return "exp_b";
    case ExperimentKind::spcp_demo: return "spcp_demo";
    case ExperimentKind::classify_demo: return "classify_demo";
  }
  return "exp_a";
}

ExperimentKind experiment_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::exp_a, ExperimentKind::exp_b, ExperimentKind::spcp_demo,
                 ExperimentKind::classify_demo}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

std::vector<double> logspace(double log10_lo, double log10_hi, int points) {
  if (points < 1) throw ConfigError("logspace: need at least one point");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double e = points == 1 ? log10_lo
                                 : log10_lo + (log10_hi - log10_lo) * i / (points - 1);
    out.push_back(std::pow(10.0, e));
  }
  return out;
}

TuningSpec default_tuning() {
  TuningSpec t;
  for (int i = 1; i <= 10; ++i) t.alpha_grid.push_back(0.1 * i);
  t.gamma_grid = logspace(0.0, 3.5, 15);
  t.bound_fraction_grid = {0.5, 0.75, 1.0};
  t.huber_gamma_grid = logspace(-1.0, 2.0, 7);
  t.lambda_grid = logspace(-3.0, 1.0, 9);
  t.spcp_mu_grid = logspace(-1.0, 1.0, 5);
  return t;
}

ExperimentSpec default_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.experiment = kind;
  switch (kind) {
    case ExperimentKind::exp_a:
      s.m = 64;
      s.n = 128;
      s.s = 21;
      s.snr_db = 20.0;
      s.methods = {"ols", "lasso", "pmc"};
      break;
    case ExperimentKind::exp_b:
      s.m = 128;
      s.n = 64;
      s.snr_db = 10.0;
      s.sor_db = -30.0;
      s.outlier_density = 0.15;
      s.methods = {"sorr", "orr", "huber", "lad_ridge", "ols", "ridge"};
      break;
    case ExperimentKind::spcp_demo:
      s.m = 20;
      s.n = 20;
      s.rank = 2;
      s.outlier_density = 0.05;
      s.noise_sigma = 0.01;
      s.trials = 5;
      s.methods = {"spcp", "tsvd"};
      break;
    case ExperimentKind::classify_demo:
      s.m = 200;
      s.n = 5;
      s.trials = 5;
      s.methods = {"limes_hinge"};
      break;
  }
  return s;
}

void ExperimentSpec::validate() const {
  if (m < 1 || n < 1) throw ConfigError("experiment: m and n must be >= 1");
  if (trials < 1) throw ConfigError("experiment: trials must be >= 1");
  if (experiment == ExperimentKind::exp_a && (s < 0 || s > n)) {
    throw InputError("experiment: s must lie in [0, n]");
  }
  if (!(outlier_density >= 0.0 && outlier_density <= 1.0)) {
    throw ConfigError("experiment: outlier_density must lie in [0, 1]");
  }
  if (snr_db && !std::isfinite(*snr_db)) throw ConfigError("experiment: snr_db must be finite");
  if (!std::isfinite(sor_db)) throw ConfigError("experiment: sor_db must be finite");
  if (experiment == ExperimentKind::spcp_demo) {
    if (rank < 0 || rank > std::min(m, n)) throw InputError("experiment: rank exceeds min(n, m)");
    if (!(noise_sigma >= 0.0)) throw ConfigError("experiment: noise_sigma must be >= 0");
  }
  if (methods.empty()) throw ConfigError("experiment: methods is empty");
  const auto& known = known_methods(experiment);
  std::set<std::string> seen;
  for (const auto& method : methods) {
    if (std::find(known.begin(), known.end(), method) == known.end()) {
      throw ConfigError("experiment: method '" + method + "' is not available for " +
                        bench::to_string(experiment));
    }
    if (!seen.insert(method).second) throw ConfigError("experiment: duplicate method " + method);
  }
  const TuningSpec& t = tuning;
  check_grid(t.alpha_grid, "alpha_grid");
  for (double a : t.alpha_grid) {
    if (a > 1.0) throw ConfigError("tuning.alpha_grid entries must lie in (0, 1]");
  }
  check_grid(t.gamma_grid, "gamma_grid");
  check_grid(t.bound_fraction_grid, "bound_fraction_grid");
  for (double f : t.bound_fraction_grid) {
    if (f > 1.0) throw ConfigError("tuning.bound_fraction_grid entries must lie in (0, 1]");
  }
  check_grid(t.huber_gamma_grid, "huber_gamma_grid");
  check_grid(t.lambda_grid, "lambda_grid");
  check_grid(t.spcp_mu_grid, "spcp_mu_grid");
  if (!(t.classify_gamma > 0.0)) throw ConfigError("tuning.classify_gamma must be > 0");
  if (!(t.sparseness_tol >= 0.0)) throw ConfigError("tuning.sparseness_tol must be >= 0");
  if (t.bisection_steps < 1 || t.mu_grid_points < 2) {
    throw ConfigError("tuning: bisection_steps >= 1 and mu_grid_points >= 2 required");
  }
  if (!(t.mu_lo_factor > 0.0 && t.mu_lo_factor < 1.0)) {
    throw ConfigError("tuning.mu_lo_factor must lie in (0, 1)");
  }
  if (!(t.rel_tol >= 0.0) || t.max_iter < 1 || t.spcp_max_iter < 1) {
    throw ConfigError("tuning: invalid solver tolerances");
  }
}

ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  if (!j.contains("experiment") || !j.at("experiment").is_string()) {
    throw ConfigError("experiment spec needs a string field 'experiment'");
  }
  static const std::set<std::string> keys = {
      "experiment", "m",      "n",           "s",           "snr_db",       "sor_db",
      "outlier_density", "rank", "noise_sigma", "sparse_scale", "trials", "master_seed",
      "seed",       "methods", "tuning",     "timing"};
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("experiment spec: unknown field '" + key + "'");
  }
  ExperimentSpec s = default_spec(experiment_from_string(j.at("experiment").get<std::string>()));
  const char* scope = "experiment.";
  read_number(j, "m", s.m, scope);
  read_number(j, "n", s.n, scope);
  read_number(j, "s", s.s, scope);
  if (j.contains("snr_db")) {
    if (j.at("snr_db").is_null()) {
      s.snr_db.reset();
    } else {
      double v = 0.0;
      read_number(j, "snr_db", v, scope);
      s.snr_db = v;
    }
  }
  read_number(j, "sor_db", s.sor_db, scope);
  read_number(j, "outlier_density", s.outlier_density, scope);
  read_number(j, "rank", s.rank, scope);
  read_number(j, "noise_sigma", s.noise_sigma, scope);
  read_number(j, "sparse_scale", s.sparse_scale, scope);
  read_number(j, "trials", s.trials, scope);
  read_number(j, "seed", s.master_seed, scope);
  read_number(j, "master_seed", s.master_seed, scope);
  if (j.contains("timing")) {
    if (!j.at("timing").is_boolean()) throw ConfigError("experiment.timing must be a boolean");
    s.timing = j.at("timing").get<bool>();
  }
  if (j.contains("methods")) {
    const json& v = j.at("methods");
    if (!v.is_array()) throw ConfigError("experiment.methods must be an array of names");
    s.methods.clear();
    for (const auto& name : v) {
      if (!name.is_string()) throw ConfigError("experiment.methods must be an array of names");
      s.methods.push_back(name.get<std::string>());
    }
  }
  if (j.contains("tuning")) {
    const json& t = j.at("tuning");
    if (!t.is_object()) throw ConfigError("experiment.tuning must be an object");
    static const std::set<std::string> tkeys = {
        "alpha_grid",    "sparseness_tol", "bisection_steps", "mu_grid_points",
        "mu_lo_factor",  "gamma_grid",     "bound_fraction_grid", "huber_gamma_grid",
        "lambda_grid",   "spcp_mu_grid",   "classify_gamma",  "rel_tol",
        "max_iter",      "spcp_max_iter"};
    for (const auto& [key, value] : t.items()) {
      if (!tkeys.count(key)) throw ConfigError("experiment.tuning: unknown field '" + key + "'");
    }
    TuningSpec& ts = s.tuning;
    const char* tscope = "tuning.";
    read_grid(t, "alpha_grid", ts.alpha_grid);
    read_number(t, "sparseness_tol", ts.sparseness_tol, tscope);
    read_number(t, "bisection_steps", ts.bisection_steps, tscope);
    read_number(t, "mu_grid_points", ts.mu_grid_points, tscope);
    read_number(t, "mu_lo_factor", ts.mu_lo_factor, tscope);
    read_grid(t, "gamma_grid", ts.gamma_grid);
    read_grid(t, "bound_fraction_grid", ts.bound_fraction_grid);
    read_grid(t, "huber_gamma_grid", ts.huber_gamma_grid);
    read_grid(t, "lambda_grid", ts.lambda_grid);
    read_grid(t, "spcp_mu_grid", ts.spcp_mu_grid);
    read_number(t, "classify_gamma", ts.classify_gamma, tscope);
    read_number(t, "rel_tol", ts.rel_tol, tscope);
    read_number(t, "max_iter", ts.max_iter, tscope);
    read_number(t, "spcp_max_iter", ts.spcp_max_iter, tscope);
  }
  s.validate();
  return s;
}

json to_json(const ExperimentSpec& s) {
  json j;
  j["experiment"] = to_string(s.experiment);
  j["m"] = s.m;
  j["n"] = s.n;
  j["s"] = s.s;
  j["snr_db"] = s.snr_db ? json(*s.snr_db) : json(nullptr);
  j["sor_db"] = s.sor_db;
  j["outlier_density"] = s.outlier_density;
  j["rank"] = s.rank;
  j["noise_sigma"] = s.noise_sigma;
  j["sparse_scale"] = s.sparse_scale;
  j["trials"] = s.trials;
  j["master_seed"] = s.master_seed;
  j["methods"] = s.methods;
  j["timing"] = s.timing;
  const TuningSpec& t = s.tuning;
  j["tuning"] = {{"alpha_grid", t.alpha_grid},
                 {"sparseness_tol", t.sparseness_tol},
                 {"bisection_steps", t.bisection_steps},
                 {"mu_grid_points", t.mu_grid_points},
                 {"mu_lo_factor", t.mu_lo_factor},
                 {"gamma_grid", t.gamma_grid},
                 {"bound_fraction_grid", t.bound_fraction_grid},
                 {"huber_gamma_grid", t.huber_gamma_grid},
                 {"lambda_grid", t.lambda_grid},
                 {"spcp_mu_grid", t.spcp_mu_grid},
                 {"classify_gamma", t.classify_gamma},
                 {"rel_tol", t.rel_tol},
                 {"max_iter", t.max_iter},
                 {"spcp_max_iter", t.spcp_max_iter}};
  return j;
}

std::uint64_t trial_seed(std::uint64_t master_seed, int trial) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master_seed) + static_cast<std::uint64_t>(trial));
}

SparseModel gen_sparse_model(const ExperimentSpec& spec, int trial) {
  if (spec.s < 0 || spec.s > spec.n) throw InputError("gen_sparse_model: s must lie in [0, n]");
  std::mt19937_64 rng(trial_seed(spec.master_seed, trial));
  SparseModel d;
  d.a = gaussian_matrix(spec.m, spec.n, rng);
  d.x = Vector::Zero(spec.n);
  const auto support = random_subset(spec.n, spec.s, rng);
  std::normal_distribution<double> normal;
  for (Index i : support) d.x(i) = normal(rng);
  const Vector signal = d.a * d.x;
  d.noise = scaled_noise(signal, spec.snr_db, rng);
  d.y = signal + d.noise;
  return d;
}

OutlierModel gen_outlier_model(const ExperimentSpec& spec, int trial) {
  std::mt19937_64 rng(trial_seed(spec.master_seed, trial));
  OutlierModel d;
  d.a = gaussian_matrix(spec.m, spec.n, rng);
  d.x = gaussian_vector(spec.n, rng);
  const Vector signal = d.a * d.x;
  d.noise = scaled_noise(signal, spec.snr_db, rng);
  const Index count = std::llround(spec.outlier_density * static_cast<double>(spec.m));
  d.outliers = Vector::Zero(spec.m);
  const auto support = random_subset(spec.m, count, rng);
  std::normal_distribution<double> normal;
  for (Index i : support) d.outliers(i) = normal(rng);
  if (count > 0 && signal.squaredNorm() > 0.0) {
    // (|Ax|^2 / m) / (|o|^2 / |supp o|) = 10^(sor_db / 10).
    const double target = std::pow(10.0, spec.sor_db / 10.0);
    const double signal_power = signal.squaredNorm() / static_cast<double>(spec.m);
    const double outlier_power = d.outliers.squaredNorm() / static_cast<double>(count);
    d.outliers *= std::sqrt(signal_power / (target * outlier_power));
  } else {
    d.outliers.setZero();
  }
  d.y = signal + d.noise + d.outliers;
  return d;
}

SpcpModel gen_spcp_model(Index n, Index m, Index rank, double sparse_fraction, double sigma,
                         std::uint64_t seed, double sparse_scale) {
  if (rank < 0 || rank > std::min(n, m)) throw InputError("gen_spcp_model: rank exceeds min(n, m)");
  if (!(sparse_fraction >= 0.0 && sparse_fraction <= 1.0)) {
    throw InputError("gen_spcp_model: sparse fraction must lie in [0, 1]");
  }
  if (!(sigma >= 0.0)) throw InputError("gen_spcp_model: sigma must be >= 0");
  std::mt19937_64 rng(seed);
  SpcpModel d;
  const Matrix left = gaussian_matrix(n, rank, rng);
  const Matrix right = gaussian_matrix(rank, m, rng);
  d.low_rank = rank > 0 ? Matrix(left * right) : Matrix::Zero(n, m);
  d.sparse = Matrix::Zero(n, m);
  const Index count = std::llround(sparse_fraction * static_cast<double>(n * m));
  std::normal_distribution<double> normal;
  for (Index idx : random_subset(n * m, count, rng)) {
    d.sparse(idx / m, idx % m) = sparse_scale * normal(rng);
  }
  d.noise = sigma * gaussian_matrix(n, m, rng);
  d.y = d.low_rank + d.sparse + d.noise;
  return d;
}

ClassifyModel gen_classify_model(Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw InputError("gen_classify_model: m and n must be >= 1");
  std::mt19937_64 rng(seed);
  ClassifyModel d;
  d.direction = gaussian_vector(n, rng);
  d.samples = gaussian_matrix(m, n, rng);
  d.labels.resize(m);
  for (Index i = 0; i < m; ++i) {
    d.labels(i) = d.samples.row(i).dot(d.direction) >= 0.0 ? 1.0 : -1.0;
  }
  return d;
}

double hoyer_sparseness(const Vector& x) {
  const double n = static_cast<double>(x.size());
  const double l2 = x.norm();
  if (l2 == 0.0 || x.size() <= 1) return 1.0;
  const double root = std::sqrt(n);
  const double value = (n / (n - root)) * (1.0 - x.lpNorm<1>() / (root * l2));
  return std::clamp(value, 0.0, 1.0);
}

double system_mismatch(const Vector& x_true, const Vector& x) {
  if (x_true.size() != x.size()) throw InputError("system_mismatch: length mismatch");
  const double denom = x_true.squaredNorm();
  if (denom == 0.0) throw InputError("system_mismatch: zero reference vector");
  return (x_true - x).squaredNorm() / denom;
}

TuneOutcome tune_mu_to_sparseness(const SparseSolveFn& solve, double mu_lo, double mu_hi,
                                  double target, const TuningSpec& tuning) {
  TuneOutcome out;
  if (!(target >= 0.0 && target <= 1.0)) {
    out.note = "target sparseness outside [0, 1]";
    return out;
  }
  if (!(mu_lo > 0.0 && mu_hi > mu_lo)) {
    out.note = "invalid mu bracket";
    return out;
  }
  double lo = std::log(mu_lo);
  double hi = std::log(mu_hi);
  std::optional<Vector> warm;
  bool seen_below = false;
  bool seen_above = false;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int step = 0; step < tuning.bisection_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    SolveResult res = solve(std::exp(mid), warm);
    const double h = hoyer_sparseness(res.x);
    const double gap = std::abs(h - target);
    warm = res.x;
    if (gap < best_gap) {
      best_gap = gap;
      out.mu = std::exp(mid);
      out.sparseness = h;
      out.result = std::move(res);
    }
    if (gap <= tuning.sparseness_tol) {
      out.ok = true;
      return out;
    }
    if (h < target) {
      seen_below = true;
      lo = mid;
    } else {
      seen_above = true;
      hi = mid;
    }
  }
  if (!seen_below) {
    out.ok = false;
    out.note = "target below the sparseness reached at the lower bracket";
    return out;
  }
  if (!seen_above) {
    out.ok = false;
    out.note = "target above the sparseness reached at the upper bracket";
    return out;
  }
  // Bisection stalled; scan a log grid from the large-mu end.
  warm.reset();
  best_gap = std::numeric_limits<double>::infinity();
  const int points = tuning.mu_grid_points;
  for (int i = points - 1; i >= 0; --i) {
    const double t = static_cast<double>(i) / (points - 1);
    const double mu = std::exp(std::log(mu_lo) + t * (std::log(mu_hi) - std::log(mu_lo)));
    SolveResult res = solve(mu, warm);
    const double h = hoyer_sparseness(res.x);
    warm = res.x;
    if (std::abs(h - target) < best_gap) {
      best_gap = std::abs(h - target);
      out.mu = mu;
      out.sparseness = h;
      out.result = std::move(res);
    }
  }
  out.ok = true;
  out.note = "grid fallback";
  return out;
}

Vector baseline_ols(const Matrix& a, const Vector& y) {
  if (y.size() != a.rows()) throw InputError("baseline_ols: y length does not match A");
  return pseudo_inverse(a) * y;
}

Vector baseline_ridge(const Matrix& a, const Vector& y, double lambda) {
  if (y.size() != a.rows()) throw InputError("baseline_ridge: y length does not match A");
  if (!(lambda > 0.0)) throw InputError("baseline_ridge: lambda must be > 0");
  Matrix g = a.transpose() * a;
  g.diagonal().array() += lambda;
  return g.llt().solve(a.transpose() * y);
}

SolveResult baseline_huber(const Matrix& a, const Vector& y, double gamma, double lambda,
                           const SolverConfig& config, std::optional<double> lambda_max) {
  if (y.size() != a.rows()) throw InputError("baseline_huber: y length does not match A");
  if (!(gamma > 0.0) || !(lambda > 0.0)) {
    throw InputError("baseline_huber: gamma and lambda must be > 0");
  }
  const SeedPtr l1 = make_l1(a.rows());
  const double lip = (lambda_max ? *lambda_max : lambda_max_gram(a)) / gamma + lambda;
  const double step = 1.0 / lip;
  auto objective = [&](const Vector& x) {
    return moreau_envelope(*l1, a * x - y, gamma) + 0.5 * lambda * x.squaredNorm();
  };
  SolveResult out;
  out.step_beta = step;
  Vector x = Vector::Zero(a.cols());
  if (config.record_trace) out.objective_trace.push_back(objective(x));
  for (int k = 1; k <= config.max_iter; ++k) {
    const Vector grad = a.transpose() * moreau_gradient(*l1, a * x - y, gamma) + lambda * x;
    Vector next = x - step * grad;
    const double change = (next - x).norm() / std::max(1.0, x.norm());
    x = std::move(next);
    out.iterations = k;
    out.residual_trace.push_back(change);
    if (config.record_trace) out.objective_trace.push_back(objective(x));
    if (change <= config.rel_tol) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  return out;
}

SolveResult baseline_lad_ridge(const Matrix& a, const Vector& y, double lambda,
                               const SolverConfig& config) {
  return primal_dual_debiasing(make_lad_ridge(a, y, lambda), config);
}

Matrix truncated_svd(const Matrix& y, Index rank) {
  if (rank < 0 || rank > std::min(y.rows(), y.cols())) {
    throw InputError("truncated_svd: rank out of range");
  }
  if (rank == 0) return Matrix::Zero(y.rows(), y.cols());
  Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(rank) * svd.singularValues().head(rank).asDiagonal() *
         svd.matrixV().leftCols(rank).transpose();
}

std::vector<TrialResult> run_trial(const ExperimentSpec& spec, int trial) {
  switch (spec.experiment) {
    case ExperimentKind::exp_a: return trial_exp_a(spec, trial);
    case ExperimentKind::exp_b: return trial_exp_b(spec, trial);
    case ExperimentKind::spcp_demo: return trial_spcp(spec, trial);
    case ExperimentKind::classify_demo: return trial_classify(spec, trial);
  }
  return {};
}

int thread_count() {
  const char* env = std::getenv("LIMES_THREADS");
  if (env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw ConfigError(std::string("LIMES_THREADS must be a positive integer, got '") + env + "'");
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials,
                                    const std::vector<std::string>& methods) {
  std::vector<AggregateRow> rows;
  for (const auto& method : methods) {
    AggregateRow row;
    row.method = method;
    double sum = 0.0;
    for (const auto& t : trials) {
      if (t.method == method && t.valid) {
        sum += t.mismatch;
        ++row.n_trials;
      }
    }
    if (row.n_trials == 0) {
      row.mean_mismatch = kNaN;
      row.stderr_mismatch = kNaN;
    } else {
      row.mean_mismatch = sum / row.n_trials;
      double ss = 0.0;
      for (const auto& t : trials) {
        if (t.method == method && t.valid) ss += (t.mismatch - row.mean_mismatch) * (t.mismatch - row.mean_mismatch);
      }
      row.stderr_mismatch =
          row.n_trials > 1 ? std::sqrt(ss / (row.n_trials - 1) / row.n_trials) : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec, int threads) {
  spec.validate();
  ExperimentOutcome outcome;
  outcome.spec = spec;
  outcome.threads = std::clamp(threads > 0 ? threads : thread_count(), 1, spec.trials);
  std::vector<std::vector<TrialResult>> per_trial(static_cast<std::size_t>(spec.trials));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int t = next++; t < spec.trials; t = next++) {
      try {
        per_trial[static_cast<std::size_t>(t)] = run_trial(spec, t);
      } catch (const std::exception& e) {
        std::vector<TrialResult> failed;
        for (const auto& method : spec.methods) failed.push_back(invalid(t, method, e.what()));
        per_trial[static_cast<std::size_t>(t)] = std::move(failed);
      }
    }
  };
  if (outcome.threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < outcome.threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& rows : per_trial) {
    for (auto& r : rows) outcome.trials.push_back(std::move(r));
  }
  outcome.aggregate = aggregate(outcome.trials, spec.methods);
  return outcome;
}

void write_trials_csv(std::ostream& out, const ExperimentOutcome& outcome) {
  const ExperimentSpec& s = outcome.spec;
  using csv::format_double;
  out << "experiment,trial,method,m,n,s,snr_db,sor_db,density,mu,gamma,mismatch,sparseness,"
         "iterations,wallclock_ms\n";
  const std::string snr = s.snr_db ? format_double(*s.snr_db) : "inf";
  for (const auto& t : outcome.trials) {
    out << to_string(s.experiment) << ',' << t.trial << ',' << t.method << ',' << s.m << ','
        << s.n << ',' << s.s << ',' << snr << ',' << format_double(s.sor_db) << ','
        << format_double(s.outlier_density) << ',' << format_double(t.mu) << ','
        << format_double(t.gamma) << ',' << format_double(t.mismatch) << ','
        << format_double(t.sparseness) << ',' << t.iterations << ','
        << format_double(t.wallclock_ms) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const ExperimentOutcome& outcome) {
  using csv::format_double;
  out << "method,mean_mismatch,stderr_mismatch,n_trials\n";
  for (const auto& row : outcome.aggregate) {
    out << row.method << ',' << format_double(row.mean_mismatch) << ','
        << format_double(row.stderr_mismatch) << ',' << row.n_trials << '\n';
  }
}

const AggregateRow* find_method(const ExperimentOutcome& outcome, const std::string& method) {
  for (const auto& row : outcome.aggregate) {
    if (row.method == method) return &row;
  }
  return nullptr;
}

}  // namespace limes::bench
