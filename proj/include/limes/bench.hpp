#pragma once

#include "limes/linop.hpp"
#include "limes/solvers.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace limes::bench {

enum class ExperimentKind { exp_a, exp_b, spcp_demo, classify_demo };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_from_string(const std::string& name);

std::vector<double> logspace(double log10_lo, double log10_hi, int points);

struct TuningSpec {
  // Sparseness matching.
  std::vector<double> alpha_grid;  // gamma = mu / (alpha lambda_min++)
  double sparseness_tol = 0.01;
  int bisection_steps = 40;
  int mu_grid_points = 40;
  double mu_lo_factor = 1e-6;  // lower bracket relative to |A^T y|_inf
  // Grid searches.
  std::vector<double> gamma_grid;           // sorr and orr
  std::vector<double> bound_fraction_grid;  // mu as a fraction of the convexity bound
  std::vector<double> huber_gamma_grid;
  std::vector<double> lambda_grid;  // ridge, huber and lad_ridge regularization
  std::vector<double> spcp_mu_grid;  // both mu_L and mu_S
  double classify_gamma = 100.0;
  // Inner solves.
  double rel_tol = 1e-8;
  int max_iter = 20000;
  // Degenerate mu_L == mu_S points converge slowly; they are capped here.
  int spcp_max_iter = 2000;
};

TuningSpec default_tuning();

struct ExperimentSpec {
  ExperimentKind experiment = ExperimentKind::exp_a;
  Index m = 64;
  Index n = 128;
  Index s = 21;
  std::optional<double> snr_db = 20.0;  // empty: noiseless
  double sor_db = -30.0;
  double outlier_density = 0.15;  // sparse fraction for the spcp demo
  Index rank = 2;
  double noise_sigma = 0.01;
  double sparse_scale = 10.0;
  int trials = 100;
  std::uint64_t master_seed = 1;
  std::vector<std::string> methods;
  TuningSpec tuning = default_tuning();
  /// Record measured wall-clock times; off by default so reruns are byte-identical.
  bool timing = false;

  void validate() const;
};

/// Defaults for each experiment, including its method list.
ExperimentSpec default_spec(ExperimentKind kind);

ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentSpec& spec);

/// Seed of one trial's random stream; independent of the order trials run in.
std::uint64_t trial_seed(std::uint64_t master_seed, int trial);

struct SparseModel {
  Matrix a;
  Vector x;
  Vector noise;
  Vector y;
};

struct OutlierModel {
  Matrix a;
  Vector x;
  Vector noise;
  Vector outliers;
  Vector y;
};

struct SpcpModel {
  Matrix low_rank;
  Matrix sparse;
  Matrix noise;
  Matrix y;
};

SparseModel gen_sparse_model(const ExperimentSpec& spec, int trial);
OutlierModel gen_outlier_model(const ExperimentSpec& spec, int trial);
SpcpModel gen_spcp_model(Index n, Index m, Index rank, double sparse_fraction, double sigma,
                         std::uint64_t seed, double sparse_scale = 10.0);

/// Labels sign(w . a_i) for Gaussian samples and a Gaussian direction w.
struct ClassifyModel {
  Matrix samples;
  Vector labels;
  Vector direction;
};
ClassifyModel gen_classify_model(Index m, Index n, std::uint64_t seed);

double hoyer_sparseness(const Vector& x);
double system_mismatch(const Vector& x_true, const Vector& x);

/// Solver for one value of mu, optionally warm-started.
using SparseSolveFn = std::function<SolveResult(double mu, const std::optional<Vector>& warm)>;

struct TuneOutcome {
  bool ok = false;
  double mu = 0.0;
  double sparseness = 0.0;
  SolveResult result;
  std::string note;
};

/// Bisection over log mu in [mu_lo, mu_hi] matching the solution's sparseness to
/// `target`, with a log-grid fallback when bisection does not get within tolerance.
TuneOutcome tune_mu_to_sparseness(const SparseSolveFn& solve, double mu_lo, double mu_hi,
                                  double target, const TuningSpec& tuning);

Vector baseline_ols(const Matrix& a, const Vector& y);
Vector baseline_ridge(const Matrix& a, const Vector& y, double lambda);
/// Minimizes sum_i huber_gamma((Ax - y)_i) + (lambda / 2)|x|^2 by gradient descent.
SolveResult baseline_huber(const Matrix& a, const Vector& y, double gamma, double lambda,
                           const SolverConfig& config = {}, std::optional<double> lambda_max = {});
SolveResult baseline_lad_ridge(const Matrix& a, const Vector& y, double lambda,
                               const SolverConfig& config = {});
/// Best rank-r approximation by truncated SVD.
Matrix truncated_svd(const Matrix& y, Index rank);

struct TrialResult {
  int trial = 0;
  std::string method;
  double mu = 0.0;
  double gamma = 0.0;
  double mismatch = 0.0;
  double sparseness = 0.0;
  int iterations = 0;
  double wallclock_ms = 0.0;
  bool valid = true;
  std::string note;
};

struct AggregateRow {
  std::string method;
  double mean_mismatch = 0.0;
  double stderr_mismatch = 0.0;
  int n_trials = 0;
};

struct ExperimentOutcome {
  ExperimentSpec spec;
  std::vector<TrialResult> trials;  // ordered by (trial, method)
  std::vector<AggregateRow> aggregate;
  int threads = 1;
};

/// Worker count from LIMES_THREADS, defaulting to the hardware concurrency.
int thread_count();

ExperimentOutcome run_experiment(const ExperimentSpec& spec, int threads = 0);

/// Results of one trial; exposed so callers can run trials individually.
std::vector<TrialResult> run_trial(const ExperimentSpec& spec, int trial);

std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials,
                                    const std::vector<std::string>& methods);

void write_trials_csv(std::ostream& out, const ExperimentOutcome& outcome);
void write_aggregate_csv(std::ostream& out, const ExperimentOutcome& outcome);

const AggregateRow* find_method(const ExperimentOutcome& outcome, const std::string& method);

}  // namespace limes::bench
