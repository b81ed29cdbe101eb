#include "limes/solvers.hpp"

#include "limes/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace limes {

namespace {

void validate_config(const SolverConfig& c) {
  if (c.max_iter < 1) throw ConfigError("solver: max_iter must be >= 1");
  if (!(c.rel_tol >= 0.0) || !std::isfinite(c.rel_tol)) {
    throw ConfigError("solver: rel_tol must be finite and >= 0");
  }
  if (!(c.relaxation > 0.0 && c.relaxation <= 1.0)) {
    throw ConfigError("solver: relaxation must lie in (0, 1]");
  }
}

void convexity_guard(const LimesProblem& problem, const SolverConfig& config, SolveResult& out) {
  if (!config.verify_convexity) return;
  const ConvexityReport report = spade_check(problem);
  out.convexity_margin = report.margin;
  if (report.satisfied) return;
  if (!config.allow_nonconvex) {
    std::ostringstream msg;
    msg << "convexity condition violated (margin " << report.margin << ", tolerance "
        << report.tolerance << "); pass allow_nonconvex to run anyway";
    throw ConvexityError(msg.str());
  }
  out.global_guarantee = false;
}

Vector initial_point(const std::optional<Vector>& x0, Index n, const char* name) {
  if (!x0) return Vector::Zero(n);
  if (x0->size() != n) {
    throw InputError(std::string("solver: ") + name + " has length " + std::to_string(x0->size()) +
                     ", expected " + std::to_string(n));
  }
  if (!all_finite(*x0)) throw InputError(std::string("solver: ") + name + " is not finite");
  return *x0;
}

double relative_change(const Vector& next, const Vector& prev) {
  return (next - prev).norm() / std::max(1.0, prev.norm());
}

void check_iterate(const Vector& x, int k) {
  if (!all_finite(x)) {
    throw NumericalError("solver: non-finite iterate at iteration " + std::to_string(k));
  }
}

// Prox of beta * mu * Psi(. + c2) at w.
Vector shifted_prox(const LimesProblem& p, const Vector& w, double beta) {
  if (!p.a2().has_offset()) return p.seed().prox(w, beta * p.mu());
  const Vector& c2 = p.a2().offset();
  return p.seed().prox(w + c2, beta * p.mu()) - c2;
}

struct PrimalDualStep {
  Vector x;
  Vector v;
};

PrimalDualStep primal_dual_map(const LimesProblem& p, const Vector& x, const Vector& v, double tau,
                               double sigma) {
  const Matrix& m2 = p.a2().matrix();
  const bool id = p.a2().linear_is_identity();
  const Vector s = x - tau * smooth_gradient(p, x);
  const Vector u = id ? Vector(s - tau * v) : Vector(s - tau * (m2.transpose() * v));
  const Vector z = id ? Vector(v + sigma * u) : Vector(v + sigma * (m2 * u));
  PrimalDualStep out;
  out.v = shifted_conjugate_prox(p.seed(), p.mu(), p.a2().offset(), z, sigma);
  out.x = id ? Vector(s - tau * out.v) : Vector(s - tau * (m2.transpose() * out.v));
  return out;
}

}  // namespace

double resolve_prox_grad_step(const LimesProblem& problem, const SolverConfig& config) {
  const double limit = 2.0 / problem.smooth_lipschitz();
  if (!config.step_beta) return 0.99 * limit;
  const double beta = *config.step_beta;
  if (!(beta > 0.0 && beta < limit)) {
    std::ostringstream msg;
    msg << "prox-gradient step " << beta << " outside (0, " << limit << ")";
    throw ConfigError(msg.str());
  }
  return beta;
}

std::pair<double, double> resolve_primal_dual_steps(const LimesProblem& problem,
                                                    const SolverConfig& config) {
  const double limit = 2.0 / problem.smooth_lipschitz();
  const double m2_sq = problem.m2_norm_sq();
  const double tau = config.tau ? *config.tau : 0.99 * limit;
  if (!(tau > 0.0 && tau < limit)) {
    std::ostringstream msg;
    msg << "primal-dual tau " << tau << " outside (0, " << limit << ")";
    throw ConfigError(msg.str());
  }
  const double sigma = config.sigma ? *config.sigma : 0.99 / (tau * m2_sq);
  if (!(sigma > 0.0) || !(tau * sigma * m2_sq < 1.0)) {
    std::ostringstream msg;
    msg << "primal-dual steps violate tau * sigma * |M2|^2 < 1 (tau " << tau << ", sigma " << sigma
        << ", |M2|^2 " << m2_sq << ")";
    throw ConfigError(msg.str());
  }
  return {tau, sigma};
}

SolveResult proximal_debiasing_gradient(const LimesProblem& problem, const SolverConfig& config,
                                        const std::optional<Vector>& x0) {
  if (!problem.type_s()) {
    throw InputError("prox-gradient needs A2 to be the identity up to an offset; use primal-dual");
  }
  validate_config(config);
  SolveResult out;
  out.step_beta = resolve_prox_grad_step(problem, config);
  convexity_guard(problem, config, out);
  const double beta = out.step_beta;
  const double relax = config.relaxation;

  Vector x = initial_point(x0, problem.primal_dim(), "x0");
  if (config.record_trace) out.objective_trace.push_back(objective_eval(problem, x));
  for (int k = 1; k <= config.max_iter; ++k) {
    Vector next = shifted_prox(problem, x - beta * smooth_gradient(problem, x), beta);
    if (relax != 1.0) next = x + relax * (next - x);
    check_iterate(next, k);
    const double change = relative_change(next, x);
    x = std::move(next);
    out.iterations = k;
    out.residual_trace.push_back(change);
    if (config.record_trace) out.objective_trace.push_back(objective_eval(problem, x));
    if (change <= config.rel_tol) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  return out;
}

SolveResult primal_dual_debiasing(const LimesProblem& problem, const SolverConfig& config,
                                  const std::optional<Vector>& x0, const std::optional<Vector>& v0) {
  validate_config(config);
  SolveResult out;
  std::tie(out.tau, out.sigma) = resolve_primal_dual_steps(problem, config);
  convexity_guard(problem, config, out);
  const double relax = config.relaxation;

  Vector x = initial_point(x0, problem.primal_dim(), "x0");
  Vector v = initial_point(v0, problem.dual_dim(), "v0");
  if (config.record_trace) out.objective_trace.push_back(objective_eval(problem, x));
  for (int k = 1; k <= config.max_iter; ++k) {
    PrimalDualStep step = primal_dual_map(problem, x, v, out.tau, out.sigma);
    if (relax != 1.0) {
      step.x = x + relax * (step.x - x);
      step.v = v + relax * (step.v - v);
    }
    check_iterate(step.x, k);
    check_iterate(step.v, k);
    const double change = std::max(relative_change(step.x, x), relative_change(step.v, v));
    x = std::move(step.x);
    v = std::move(step.v);
    out.iterations = k;
    out.residual_trace.push_back(change);
    if (config.record_trace) out.objective_trace.push_back(objective_eval(problem, x));
    if (change <= config.rel_tol) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  out.v = std::move(v);
  return out;
}

SolveResult ista(const Matrix& a, const Vector& y, double mu, const SolverConfig& config,
                 const std::optional<Vector>& x0) {
  if (a.size() == 0) throw InputError("ista: empty design matrix");
  return ista(a, y, mu, lambda_max_gram(a), config, x0);
}

SolveResult ista(const Matrix& a, const Vector& y, double mu, double lambda_max,
                 const SolverConfig& config, const std::optional<Vector>& x0) {
  validate_config(config);
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InputError("ista: mu must be finite and > 0");
  if (y.size() != a.rows()) throw InputError("ista: y length does not match A");
  if (!(lambda_max > 0.0)) throw InputError("ista: design matrix must be nonzero");
  const double step = 1.0 / lambda_max;
  auto objective = [&](const Vector& x) {
    return 0.5 * (a * x - y).squaredNorm() + mu * x.lpNorm<1>();
  };

  SolveResult out;
  out.step_beta = step;
  Vector x = initial_point(x0, a.cols(), "x0");
  const Vector aty = a.transpose() * y;
  if (config.record_trace) out.objective_trace.push_back(objective(x));
  for (int k = 1; k <= config.max_iter; ++k) {
    const Vector grad = a.transpose() * (a * x) - aty;
    Vector next = soft_threshold(x - step * grad, step * mu);
    if (config.relaxation != 1.0) next = x + config.relaxation * (next - x);
    check_iterate(next, k);
    const double change = relative_change(next, x);
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

double fixed_point_residual(const LimesProblem& problem, const Vector& x) {
  if (!problem.type_s()) {
    throw InputError("fixed_point_residual: prox-gradient map needs a type-S problem");
  }
  if (x.size() != problem.primal_dim()) throw InputError("fixed_point_residual: dimension mismatch");
  const double beta = 1.0 / problem.smooth_lipschitz();
  return (x - shifted_prox(problem, x - beta * smooth_gradient(problem, x), beta)).norm();
}

double fixed_point_residual(const LimesProblem& problem, const Vector& x, const Vector& v) {
  if (x.size() != problem.primal_dim() || v.size() != problem.dual_dim()) {
    throw InputError("fixed_point_residual: dimension mismatch");
  }
  const auto [tau, sigma] = resolve_primal_dual_steps(problem, SolverConfig{});
  const PrimalDualStep step = primal_dual_map(problem, x, v, tau, sigma);
  return std::sqrt((step.x - x).squaredNorm() + (step.v - v).squaredNorm());
}

}  // namespace limes
