#include "limes/problem.hpp"

#include "limes/errors.hpp"

#include <cmath>

namespace limes {

namespace {

void check_positive(double value, const char* who, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InputError(std::string(who) + ": " + name + " must be finite and > 0");
  }
}

bool is_zero(const Matrix& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

void check_regression_data(const Matrix& a, const Vector& y, const char* who) {
  if (a.rows() < 1 || a.cols() < 1) throw InputError(std::string(who) + ": empty design matrix");
  if (is_zero(a)) throw InputError(std::string(who) + ": design matrix must be nonzero");
  if (y.size() != a.rows()) {
    throw InputError(std::string(who) + ": y has length " + std::to_string(y.size()) +
                     ", expected " + std::to_string(a.rows()));
  }
}

// The gram norm of x -> D (L M2 x) for a scalar D, or of the explicit product.
double envelope_operator_norm_sq(const AffineOperator& a2, const Matrix& l, bool l_identity,
                                 const BlockScalarDiagonal& d, const SpectralCache& cache) {
  if (cache.envelope_norm_sq) return *cache.envelope_norm_sq;
  if (d.is_scalar()) {
    const double s2 = d.scales().front() * d.scales().front();
    if (cache.lm2_norm_sq) return s2 * *cache.lm2_norm_sq;
    if (l_identity && a2.linear_is_identity()) return s2;
    if (l_identity) return s2 * lambda_max_gram(a2.matrix());
    if (a2.linear_is_identity()) return s2 * lambda_max_gram(l);
    return s2 * lambda_max_gram(l * a2.matrix());
  }
  Matrix op = l_identity ? a2.matrix() : Matrix(l * a2.matrix());
  op = d.diagonal().asDiagonal() * op;
  return lambda_max_gram(op);
}

// Generalized envelope min_v [Psi(v) + 0.5 |D (w - v)|^2] at w = L A2 x.
double generalized_envelope(const LimesProblem& p, const Vector& w) {
  const Vector v = weighted_prox(p.seed(), p.d(), w);
  return p.seed().eval(v) + 0.5 * p.d().apply(w - v).squaredNorm();
}

}  // namespace

std::string to_string(Application app) {
  switch (app) {
    case Application::generic: return "generic";
    case Application::pmc: return "pmc";
    case Application::mc: return "mc";
    case Application::orr: return "orr";
    case Application::sorr: return "sorr";
    case Application::spcp: return "spcp";
    case Application::classify: return "classify";
    case Application::lad_ridge: return "lad_ridge";
  }
  return "generic";
}

Application application_from_string(const std::string& name) {
  for (auto app : {Application::generic, Application::pmc, Application::mc, Application::orr,
                   Application::sorr, Application::spcp, Application::classify,
                   Application::lad_ridge}) {
    if (to_string(app) == name) return app;
  }
  throw InputError("unknown application '" + name + "'");
}

LimesProblem::LimesProblem(AffineOperator a1, AffineOperator a2, Matrix l, BlockScalarDiagonal d,
                           SeedPtr seed, double mu, Application app, ApplicationParams params,
                           bool moreau_enhanced, const SpectralCache& cache)
    : a1_(std::move(a1)),
      a2_(std::move(a2)),
      l_(std::move(l)),
      d_(std::move(d)),
      seed_(std::move(seed)),
      mu_(mu),
      app_(app),
      params_(params),
      enhanced_(moreau_enhanced) {
  if (!seed_) throw InputError("LimesProblem: null seed");
  check_positive(mu_, "LimesProblem", "mu");
  if (a1_.cols() != a2_.cols()) {
    throw InputError("LimesProblem: A1 and A2 must share the domain (" +
                     std::to_string(a1_.cols()) + " vs " + std::to_string(a2_.cols()) + ")");
  }
  if (is_zero(a1_.matrix())) throw InputError("LimesProblem: M1 must be nonzero");
  if (is_zero(a2_.matrix())) throw InputError("LimesProblem: M2 must be nonzero");
  const Index z = a2_.rows();
  if (l_.rows() != z || l_.cols() != z) {
    throw InputError("LimesProblem: L must be " + std::to_string(z) + "x" + std::to_string(z));
  }
  if (is_zero(l_)) throw InputError("LimesProblem: L must be nonzero");
  if (!l_.allFinite()) throw InputError("LimesProblem: L has non-finite entries");
  if (d_.dim() != z) throw InputError("LimesProblem: D dimension mismatch");
  if (seed_->dim() != z) throw InputError("LimesProblem: seed dimension mismatch");

  l_identity_ = l_.isIdentity(0.0);
  if (!l_identity_) l_sparse_ = sparse_copy_if_worthwhile(l_);
  m1_norm_sq_ = cache.m1_norm_sq ? *cache.m1_norm_sq
                : a1_.linear_is_identity() ? 1.0
                                           : lambda_max_gram(a1_.matrix());
  m2_norm_sq_ = cache.m2_norm_sq ? *cache.m2_norm_sq
                : a2_.linear_is_identity() ? 1.0
                                           : lambda_max_gram(a2_.matrix());
  if (enhanced_) {
    envelope_norm_sq_ = envelope_operator_norm_sq(a2_, l_, l_identity_, d_, cache);
    // Throws for a D that the seed cannot be split along.
    const Vector v = weighted_prox(*seed_, d_, Vector::Zero(z));
    envelope_constant_ = seed_->eval(v) + 0.5 * d_.apply(v).squaredNorm();
  }
  lipschitz_ = m1_norm_sq_ + mu_ * envelope_norm_sq_;
}

Vector apply_l(const LimesProblem& problem, const Vector& z) {
  if (problem.l_identity_) return z;
  if (problem.l_sparse_) return *problem.l_sparse_ * z;
  return problem.l_ * z;
}

Vector apply_l_adjoint(const LimesProblem& problem, const Vector& z) {
  if (problem.l_identity_) return z;
  if (problem.l_sparse_) return problem.l_sparse_->transpose() * z;
  return problem.l_.transpose() * z;
}

double limes_penalty_eval(const LimesProblem& problem, const Vector& z) {
  const double base = problem.seed().eval(z);
  if (!problem.moreau_enhanced()) return base;
  return base - generalized_envelope(problem, apply_l(problem, z));
}

double objective_eval(const LimesProblem& problem, const Vector& x) {
  const Vector r = problem.a1().apply(x);
  return 0.5 * r.squaredNorm() + problem.mu() * limes_penalty_eval(problem, problem.a2().apply(x));
}

double smooth_eval(const LimesProblem& problem, const Vector& x) {
  const double quad = 0.5 * problem.a1().apply(x).squaredNorm();
  if (!problem.moreau_enhanced()) return quad;
  return quad -
         problem.mu() * generalized_envelope(problem, apply_l(problem, problem.a2().apply(x)));
}

double nonsmooth_eval(const LimesProblem& problem, const Vector& x) {
  return problem.mu() * problem.seed().eval(problem.a2().apply(x));
}

Vector smooth_gradient(const LimesProblem& problem, const Vector& x) {
  Vector g = problem.a1().adjoint_apply(problem.a1().apply(x));
  if (!problem.moreau_enhanced()) return g;
  const Vector w = apply_l(problem, problem.a2().apply(x));
  const Vector v = weighted_prox(problem.seed(), problem.d(), w);
  const Vector inner = problem.d().apply_squared(w - v);
  g -= problem.mu() * problem.a2().adjoint_apply(apply_l_adjoint(problem, inner));
  return g;
}

Matrix spade_matrix(const LimesProblem& problem) {
  const Matrix& m1 = problem.a1().matrix();
  Matrix s = m1.transpose() * m1;
  if (!problem.moreau_enhanced()) return s;
  Matrix op = problem.l() * problem.a2().matrix();
  op = problem.d().diagonal().asDiagonal() * op;
  s.noalias() -= problem.mu() * (op.transpose() * op);
  return 0.5 * (s + s.transpose());
}

namespace {

// Whether the convexity condition is also necessary, and which argument says so.
std::pair<bool, std::string> necessity(const LimesProblem& p) {
  if (!p.moreau_enhanced()) return {true, "no enhancement term"};
  const auto& a2 = p.a2();
  if (p.application() == Application::classify) {
    if (numerical_rank(a2.matrix()) == a2.rows()) return {true, "range M2 is the whole space"};
    if (p.params().gamma > 1.0) return {true, "gamma > 1 puts A2(0) inside the box"};
    return {false, "sufficient only"};
  }
  if (!p.seed().is_norm()) return {false, "sufficient only"};
  if (!a2.has_offset()) return {true, "norm seed with c2 = 0"};
  if (numerical_rank(a2.matrix()) == a2.rows()) return {true, "norm seed with M2 onto"};
  // A2 x = 0 solvable: least-squares witness.
  const Vector x_hat = pseudo_inverse(a2.matrix()) * (-a2.offset());
  const double miss = a2.apply(x_hat).norm();
  if (miss <= 1e-10 * (1.0 + a2.offset().norm())) return {true, "norm seed with A2 x = 0 solvable"};
  return {false, "sufficient only"};
}

}  // namespace

ConvexityReport spade_check(const LimesProblem& problem, std::optional<double> tol) {
  const Matrix s = spade_matrix(problem);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("spade_check: eigensolver failed");
  const auto& ev = eig.eigenvalues();
  ConvexityReport report;
  report.margin = ev.minCoeff();
  const double s_norm = ev.cwiseAbs().maxCoeff();
  report.tolerance = tol ? *tol : 1e-9 * (1.0 + s_norm);
  report.satisfied = report.margin >= -report.tolerance;
  report.scale = problem.m1_norm_sq();
  auto [necessary, why] = necessity(problem);
  report.necessary = necessary;
  report.method = "min eigenvalue of M1'M1 - mu M2'L'D^2 L M2 (" + why + ")";
  return report;
}

double convexity_bound_pmc(const Matrix& a, double gamma) {
  check_positive(gamma, "convexity_bound_pmc", "gamma");
  return gamma * lambda_min_pp_gram(a);
}

double convexity_bound_sorr(const Matrix& a, double sigma_x, double sigma_eps, double gamma) {
  check_positive(gamma, "convexity_bound_sorr", "gamma");
  check_positive(sigma_x, "convexity_bound_sorr", "sigma_x");
  check_positive(sigma_eps, "convexity_bound_sorr", "sigma_eps");
  return gamma / (sigma_eps * sigma_eps + sigma_x * sigma_x * lambda_max_gram(a));
}

double convexity_bound_spcp(double gamma) {
  check_positive(gamma, "convexity_bound_spcp", "gamma");
  return 4.0 * gamma;
}

double convexity_bound_classify(const Matrix& m2, double gamma) {
  check_positive(gamma, "convexity_bound_classify", "gamma");
  return gamma / lambda_max_gram(m2);
}

DesignSpectra analyze_design(const Matrix& a) {
  DesignSpectra s;
  s.projector = projector_range_adjoint(a);
  s.lambda_max = lambda_max_gram(a);
  s.lambda_min_pp = lambda_min_pp_gram(a);
  return s;
}

LimesProblem make_pmc(const Matrix& a, const Vector& y, double mu, double gamma) {
  check_regression_data(a, y, "make_pmc");
  return make_pmc(a, y, mu, gamma, analyze_design(a));
}

LimesProblem make_pmc(const Matrix& a, const Vector& y, double mu, double gamma,
                      const DesignSpectra& spectra) {
  check_regression_data(a, y, "make_pmc");
  check_positive(mu, "make_pmc", "mu");
  check_positive(gamma, "make_pmc", "gamma");
  const Index n = a.cols();
  ApplicationParams params;
  params.gamma = gamma;
  SpectralCache cache;
  cache.m1_norm_sq = spectra.lambda_max;
  cache.lm2_norm_sq = 1.0;  // ||P|| = 1 for a nonzero projector
  return LimesProblem(AffineOperator(a, -y), AffineOperator::identity(n), spectra.projector,
                      BlockScalarDiagonal::scalar(n, 1.0 / std::sqrt(gamma)), make_l1(n), mu,
                      Application::pmc, params, true, cache);
}

LimesProblem make_mc(const Matrix& a, const Vector& y, double mu, double gamma) {
  check_regression_data(a, y, "make_mc");
  check_positive(mu, "make_mc", "mu");
  check_positive(gamma, "make_mc", "gamma");
  const Index n = a.cols();
  ApplicationParams params;
  params.gamma = gamma;
  return LimesProblem(AffineOperator(a, -y), AffineOperator::identity(n), Matrix::Identity(n, n),
                      BlockScalarDiagonal::scalar(n, 1.0 / std::sqrt(gamma)), make_l1(n), mu,
                      Application::mc, params);
}

LimesProblem make_sorr(const Matrix& a, const Vector& y, double sigma_x, double sigma_eps,
                       double mu, double gamma) {
  check_regression_data(a, y, "make_sorr");
  DesignSpectra spectra;
  spectra.lambda_max = lambda_max_gram(a);
  return make_sorr(a, y, sigma_x, sigma_eps, mu, gamma, spectra);
}

LimesProblem make_sorr(const Matrix& a, const Vector& y, double sigma_x, double sigma_eps,
                       double mu, double gamma, const DesignSpectra& spectra) {
  check_regression_data(a, y, "make_sorr");
  check_positive(sigma_x, "make_sorr", "sigma_x");
  check_positive(sigma_eps, "make_sorr", "sigma_eps");
  check_positive(mu, "make_sorr", "mu");
  check_positive(gamma, "make_sorr", "gamma");
  const Index n = a.cols();
  const Index m = a.rows();
  Vector m1_diag(n + m);
  m1_diag.head(n).setConstant(1.0 / sigma_x);
  m1_diag.tail(m).setConstant(1.0 / sigma_eps);
  Matrix m2(m, n + m);
  m2.leftCols(n) = a;
  m2.rightCols(m).setIdentity();
  ApplicationParams params;
  params.gamma = gamma;
  params.sigma_x = sigma_x;
  params.sigma_eps = sigma_eps;
  SpectralCache cache;
  cache.m1_norm_sq = std::max(1.0 / (sigma_x * sigma_x), 1.0 / (sigma_eps * sigma_eps));
  // [A I][A I]^T = A A^T + I.
  cache.m2_norm_sq = spectra.lambda_max + 1.0;
  cache.lm2_norm_sq = spectra.lambda_max + 1.0;
  return LimesProblem(AffineOperator(Matrix(m1_diag.asDiagonal())), AffineOperator(m2, -y),
                      Matrix::Identity(m, m), BlockScalarDiagonal::scalar(m, 1.0 / std::sqrt(gamma)),
                      make_l1(m), mu, Application::sorr, params, true, cache);
}

LimesProblem make_orr(const Matrix& a, const Vector& y, double mu, double gamma) {
  check_regression_data(a, y, "make_orr");
  DesignSpectra spectra;
  spectra.lambda_max = lambda_max_gram(a);
  return make_orr(a, y, mu, gamma, spectra);
}

LimesProblem make_orr(const Matrix& a, const Vector& y, double mu, double gamma,
                      const DesignSpectra& spectra) {
  check_regression_data(a, y, "make_orr");
  check_positive(mu, "make_orr", "mu");
  check_positive(gamma, "make_orr", "gamma");
  const Index n = a.cols();
  const Index m = a.rows();
  ApplicationParams params;
  params.gamma = gamma;
  SpectralCache cache;
  cache.m2_norm_sq = spectra.lambda_max;
  cache.lm2_norm_sq = spectra.lambda_max;
  return LimesProblem(AffineOperator::identity(n), AffineOperator(a, -y), Matrix::Identity(m, m),
                      BlockScalarDiagonal::scalar(m, 1.0 / std::sqrt(gamma)), make_l1(m), mu,
                      Application::orr, params, true, cache);
}

LimesProblem make_spcp(const Matrix& y, double mu_l, double mu_s, double gamma) {
  check_positive(mu_l, "make_spcp", "mu_L");
  check_positive(mu_s, "make_spcp", "mu_S");
  check_positive(gamma, "make_spcp", "gamma");
  if (y.size() == 0) throw InputError("make_spcp: empty observation");
  const Index n = y.rows();
  const Index m = y.cols();
  const Index k = n * m;
  Vector y_flat(k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) y_flat(i * m + j) = y(i, j);
  }
  Matrix m1(k, 2 * k);
  m1 << Matrix::Identity(k, k), Matrix::Identity(k, k);
  // Projector onto {(a, a)}: 0.5 [I I; I I].
  Matrix l = Matrix::Zero(2 * k, 2 * k);
  for (Index i = 0; i < k; ++i) {
    l(i, i) = l(i, i + k) = l(i + k, i) = l(i + k, i + k) = 0.5;
  }
  BlockScalarDiagonal d({IndexRange{0, k}, IndexRange{k, k}},
                        {std::sqrt(mu_l / gamma), std::sqrt(mu_s / gamma)});
  SeedPtr seed = make_block_sum({SeedBlock{IndexRange{0, k}, mu_l, make_nuclear(n, m)},
                                 SeedBlock{IndexRange{k, k}, mu_s, make_l1(k)}});
  ApplicationParams params;
  params.gamma = gamma;
  params.mu_l = mu_l;
  params.mu_s = mu_s;
  SpectralCache cache;
  cache.m1_norm_sq = 2.0;
  // |D L|^2 = (d_L^2 + d_S^2) / 2.
  cache.envelope_norm_sq = (mu_l + mu_s) / (2.0 * gamma);
  return LimesProblem(AffineOperator(m1, -y_flat), AffineOperator::identity(2 * k), std::move(l),
                      std::move(d), std::move(seed), 1.0, Application::spcp, params, true, cache);
}

Matrix classification_operator(const Matrix& samples, const Vector& labels) {
  if (samples.rows() < 1 || samples.cols() < 1) throw InputError("classify: no samples");
  if (labels.size() != samples.rows()) throw InputError("classify: one label per sample required");
  Matrix m2(samples.rows(), samples.cols());
  for (Index i = 0; i < samples.rows(); ++i) {
    const double norm = samples.row(i).norm();
    if (!(norm > 0.0)) {
      throw InputError("classify: sample " + std::to_string(i) + " is the zero vector");
    }
    if (labels(i) != 1.0 && labels(i) != -1.0) {
      throw InputError("classify: labels must be +1 or -1");
    }
    m2.row(i) = labels(i) * samples.row(i) / norm;
  }
  return m2;
}

LimesProblem make_classify(const Matrix& samples, const Vector& labels, double mu, double gamma) {
  check_positive(mu, "make_classify", "mu");
  check_positive(gamma, "make_classify", "gamma");
  Matrix m2 = classification_operator(samples, labels);
  const Index m = m2.rows();
  const Index n = m2.cols();
  ApplicationParams params;
  params.gamma = gamma;
  return LimesProblem(AffineOperator::identity(n), AffineOperator(std::move(m2), -Vector::Ones(m)),
                      Matrix::Identity(m, m), BlockScalarDiagonal::scalar(m, 1.0 / std::sqrt(gamma)),
                      make_box_support(m), mu, Application::classify, params);
}

LimesProblem make_lad_ridge(const Matrix& a, const Vector& y, double lambda) {
  check_regression_data(a, y, "make_lad_ridge");
  DesignSpectra spectra;
  spectra.lambda_max = lambda_max_gram(a);
  return make_lad_ridge(a, y, lambda, spectra);
}

LimesProblem make_lad_ridge(const Matrix& a, const Vector& y, double lambda,
                            const DesignSpectra& spectra) {
  check_regression_data(a, y, "make_lad_ridge");
  check_positive(lambda, "make_lad_ridge", "lambda");
  const Index n = a.cols();
  const Index m = a.rows();
  ApplicationParams params;
  params.lambda = lambda;
  SpectralCache cache;
  cache.m1_norm_sq = lambda;
  cache.m2_norm_sq = spectra.lambda_max;
  return LimesProblem(AffineOperator(Matrix(std::sqrt(lambda) * Matrix::Identity(n, n))),
                      AffineOperator(a, -y), Matrix::Identity(m, m),
                      BlockScalarDiagonal::scalar(m, 1.0), make_l1(m), 1.0,
                      Application::lad_ridge, params, false, cache);
}

double normalized_pmc_eval(const LimesProblem& problem, const Vector& x, double gamma) {
  if (problem.application() != Application::pmc && problem.application() != Application::mc) {
    throw InputError("normalized_pmc_eval: expects a PMC or MC problem");
  }
  check_positive(gamma, "normalized_pmc_eval", "gamma");
  const double theta = gamma < 2.0 ? 2.0 / gamma : 1.0;
  return theta * limes_penalty_eval(problem, problem.a2().apply(x));
}

std::optional<double> closed_form_bound(const LimesProblem& problem) {
  const auto& p = problem.params();
  switch (problem.application()) {
    case Application::pmc:
      return convexity_bound_pmc(problem.a1().matrix(), p.gamma);
    case Application::mc: {
      // mu <= gamma * lambda_min(A^T A); zero when A^T A is singular.
      const Matrix& a = problem.a1().matrix();
      if (a.rows() < a.cols()) return 0.0;
      Eigen::BDCSVD<Matrix> svd(a);
      const double smin = svd.singularValues().minCoeff();
      return p.gamma * smin * smin;
    }
    case Application::sorr: {
      const Index n = problem.primal_dim() - problem.dual_dim();
      const Matrix a = problem.a2().matrix().leftCols(n);
      return convexity_bound_sorr(a, p.sigma_x, p.sigma_eps, p.gamma);
    }
    case Application::orr:
      return p.gamma / problem.m2_norm_sq();
    case Application::spcp:
      return convexity_bound_spcp(p.gamma);
    case Application::classify:
      return convexity_bound_classify(problem.a2().matrix(), p.gamma);
    case Application::lad_ridge:
    case Application::generic:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace limes
