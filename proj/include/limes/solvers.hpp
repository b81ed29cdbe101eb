#pragma once

#include "limes/problem.hpp"

#include <optional>
#include <vector>

namespace limes {

struct SolverConfig {
  int max_iter = 50000;
  /// Stop when |x_{k+1} - x_k| / max(1, |x_k|) <= rel_tol.
  double rel_tol = 1e-10;
  /// Prox-gradient step; empty means 0.99 * 2 / L_F.
  std::optional<double> step_beta;
  /// Primal-dual steps; empty means tau = 0.99 * 2 / L_F and sigma = 0.99 / (tau |M2|^2).
  std::optional<double> tau;
  std::optional<double> sigma;
  /// Constant relaxation beta_k in (0, 1].
  double relaxation = 1.0;
  bool record_trace = true;
  /// Run even when the convexity condition fails; the result then carries no guarantee.
  bool allow_nonconvex = false;
  /// Skip the eigenvalue test altogether (callers that already know the answer).
  bool verify_convexity = true;
};

struct SolveResult {
  Vector x;
  Vector v;  // dual iterate, primal-dual only
  std::vector<double> objective_trace;
  std::vector<double> residual_trace;
  int iterations = 0;
  bool converged = false;
  /// The convexity condition held (or was not tested and assumed).
  bool global_guarantee = true;
  std::optional<double> convexity_margin;
  double step_beta = 0.0;
  double tau = 0.0;
  double sigma = 0.0;
};

/// Prox-gradient on F + mu Psi(. + c2) for problems with A2 = I + c2.
SolveResult proximal_debiasing_gradient(const LimesProblem& problem, const SolverConfig& config = {},
                                        const std::optional<Vector>& x0 = {});

/// The primal-dual debiasing iteration for problems of any shape.
SolveResult primal_dual_debiasing(const LimesProblem& problem, const SolverConfig& config = {},
                                  const std::optional<Vector>& x0 = {},
                                  const std::optional<Vector>& v0 = {});

/// ISTA for 0.5 |Ax - y|^2 + mu |x|_1 with step 1 / lambda_max(A^T A).
SolveResult ista(const Matrix& a, const Vector& y, double mu, const SolverConfig& config = {},
                 const std::optional<Vector>& x0 = {});
/// Same, with lambda_max(A^T A) supplied.
SolveResult ista(const Matrix& a, const Vector& y, double mu, double lambda_max,
                 const SolverConfig& config, const std::optional<Vector>& x0 = {});

/// |x - Prox_{beta mu Psi(. + c2)}(x - beta grad F(x))| with beta = 1 / L_F (type-S only).
double fixed_point_residual(const LimesProblem& problem, const Vector& x);

/// Norm of one primal-dual step from (x, v) with the automatic steps.
double fixed_point_residual(const LimesProblem& problem, const Vector& x, const Vector& v);

/// Steps the solvers would use for this problem and config; throws ConfigError
/// when user-supplied steps leave the admissible ranges.
double resolve_prox_grad_step(const LimesProblem& problem, const SolverConfig& config);
std::pair<double, double> resolve_primal_dual_steps(const LimesProblem& problem,
                                                    const SolverConfig& config);

}  // namespace limes
