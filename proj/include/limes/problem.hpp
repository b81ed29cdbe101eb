#pragma once

#include "limes/linop.hpp"
#include "limes/proximal.hpp"

#include <optional>
#include <string>

namespace limes {

enum class Application { generic, pmc, mc, orr, sorr, spcp, classify, lad_ridge };

std::string to_string(Application app);
Application application_from_string(const std::string& name);

/// Scalars the application constructors were called with; kept for reporting
/// and for the closed-form convexity bounds.
struct ApplicationParams {
  double gamma = 0.0;
  double sigma_x = 0.0;
  double sigma_eps = 0.0;
  double mu_l = 0.0;
  double mu_s = 0.0;
  double lambda = 0.0;
};

/// Precomputed spectral norms; any field left empty is computed by power iteration.
/// `lm2_norm_sq` is ||L M2||^2 and is only used when D is a scalar multiple of I.
struct SpectralCache {
  std::optional<double> m1_norm_sq;
  std::optional<double> m2_norm_sq;
  std::optional<double> lm2_norm_sq;
  /// ||D L M2||^2 for any D.
  std::optional<double> envelope_norm_sq;
};

/// J(x) = 0.5 |A1 x|^2 + mu * Psi_D^L(A2 x), with
/// Psi_D^L(z) = Psi(z) - min_v [Psi(v) + 0.5 |D (L z - v)|^2].
///
/// With `moreau_enhanced` false the subtracted term is dropped and J reduces to
/// the plain convex model 0.5 |A1 x|^2 + mu * Psi(A2 x).
class LimesProblem {
 public:
  LimesProblem(AffineOperator a1, AffineOperator a2, Matrix l, BlockScalarDiagonal d,
               SeedPtr seed, double mu, Application app = Application::generic,
               ApplicationParams params = {}, bool moreau_enhanced = true,
               const SpectralCache& cache = {});

  const AffineOperator& a1() const { return a1_; }
  const AffineOperator& a2() const { return a2_; }
  const Matrix& l() const { return l_; }
  const BlockScalarDiagonal& d() const { return d_; }
  const ProximableSeed& seed() const { return *seed_; }
  const SeedPtr& seed_ptr() const { return seed_; }
  double mu() const { return mu_; }
  Application application() const { return app_; }
  const ApplicationParams& params() const { return params_; }
  bool moreau_enhanced() const { return enhanced_; }

  Index primal_dim() const { return a1_.cols(); }
  Index dual_dim() const { return a2_.rows(); }

  /// A2 is the identity map up to an offset, so the prox-gradient method applies.
  bool type_s() const { return a2_.linear_is_identity(); }

  /// ||M1||^2 + mu ||D L M2||^2, a Lipschitz constant of the smooth gradient.
  double smooth_lipschitz() const { return lipschitz_; }
  double m1_norm_sq() const { return m1_norm_sq_; }
  double m2_norm_sq() const { return m2_norm_sq_; }
  /// ||D L M2||^2 (zero when the enhancement is disabled).
  double envelope_norm_sq() const { return envelope_norm_sq_; }

  /// min_v [Psi(v) + 0.5 |D v|^2], the constant of the LiMES function on ker L.
  double envelope_constant() const { return envelope_constant_; }

 private:
  AffineOperator a1_;
  AffineOperator a2_;
  Matrix l_;
  BlockScalarDiagonal d_;
  SeedPtr seed_;
  double mu_;
  Application app_;
  ApplicationParams params_;
  bool enhanced_;
  bool l_identity_ = false;
  SparsePtr l_sparse_;
  double m1_norm_sq_ = 0.0;
  double m2_norm_sq_ = 0.0;
  double envelope_norm_sq_ = 0.0;
  double lipschitz_ = 0.0;
  double envelope_constant_ = 0.0;

  friend Vector apply_l(const LimesProblem&, const Vector&);
  friend Vector apply_l_adjoint(const LimesProblem&, const Vector&);
};

Vector apply_l(const LimesProblem& problem, const Vector& z);
Vector apply_l_adjoint(const LimesProblem& problem, const Vector& z);

/// Psi_D^L(z), with the inner minimum obtained in closed form from the prox.
double limes_penalty_eval(const LimesProblem& problem, const Vector& z);

/// J(x).
double objective_eval(const LimesProblem& problem, const Vector& x);

/// Smooth part F(x) = 0.5 |A1 x|^2 - mu * min_v[Psi(v) + 0.5 |D(L A2 x - v)|^2].
double smooth_eval(const LimesProblem& problem, const Vector& x);

/// Nonsmooth part mu * Psi(A2 x).
double nonsmooth_eval(const LimesProblem& problem, const Vector& x);

/// Gradient of the smooth part.
Vector smooth_gradient(const LimesProblem& problem, const Vector& x);

struct ConvexityReport {
  bool satisfied = false;
  /// Smallest eigenvalue of M1^T M1 - mu M2^T L^T D^2 L M2.
  double margin = 0.0;
  double tolerance = 0.0;
  /// Largest eigenvalue of M1^T M1, the natural scale of the margin.
  double scale = 0.0;
  /// Name of the test that produced the verdict.
  std::string method;
  /// True when the condition is also necessary for convexity of the smooth part.
  bool necessary = false;
};

Matrix spade_matrix(const LimesProblem& problem);

/// Positive-semidefiniteness test of the convexity matrix. The default tolerance
/// is 1e-9 (1 + ||S||_2).
ConvexityReport spade_check(const LimesProblem& problem, std::optional<double> tol = {});

/// Largest mu keeping the smooth part convex, closed forms per application.
double convexity_bound_pmc(const Matrix& a, double gamma);
double convexity_bound_sorr(const Matrix& a, double sigma_x, double sigma_eps, double gamma);
/// Bound on mu_L + mu_S.
double convexity_bound_spcp(double gamma);
double convexity_bound_classify(const Matrix& m2, double gamma);

/// Spectral summary of a design matrix, shared by the regression constructors.
struct DesignSpectra {
  Matrix projector;  // onto range(A^T)
  double lambda_max = 0.0;
  double lambda_min_pp = 0.0;
};

DesignSpectra analyze_design(const Matrix& a);

/// Debiased sparse modeling: 0.5|Ax - y|^2 + mu (|x|_1 - env_gamma |.|_1 (P x)), P onto range(A^T).
LimesProblem make_pmc(const Matrix& a, const Vector& y, double mu, double gamma);
LimesProblem make_pmc(const Matrix& a, const Vector& y, double mu, double gamma,
                      const DesignSpectra& spectra);
/// Plain MC penalty (L = I), nonconvex when A^T A is singular.
LimesProblem make_mc(const Matrix& a, const Vector& y, double mu, double gamma);

/// Stable outlier-robust regression over xi = (x, eps) in R^{n+m}; sigma_x and
/// sigma_eps are standard deviations.
LimesProblem make_sorr(const Matrix& a, const Vector& y, double sigma_x, double sigma_eps,
                       double mu, double gamma);
LimesProblem make_sorr(const Matrix& a, const Vector& y, double sigma_x, double sigma_eps,
                       double mu, double gamma, const DesignSpectra& spectra);
/// Outlier-robust regression: mu * MC(Ax - y) + 0.5 |x|^2.
LimesProblem make_orr(const Matrix& a, const Vector& y, double mu, double gamma);
LimesProblem make_orr(const Matrix& a, const Vector& y, double mu, double gamma,
                      const DesignSpectra& spectra);

/// Stable principal component pursuit over the stacked row-major pair (L, S).
LimesProblem make_spcp(const Matrix& y, double mu_l, double mu_s, double gamma);

/// Moreau-enhanced hinge classification. Rows of `samples` are normalized.
LimesProblem make_classify(const Matrix& samples, const Vector& labels, double mu, double gamma);

/// |Ax - y|_1 + (lambda / 2)|x|^2, the model without enhancement.
LimesProblem make_lad_ridge(const Matrix& a, const Vector& y, double lambda);
LimesProblem make_lad_ridge(const Matrix& a, const Vector& y, double lambda,
                            const DesignSpectra& spectra);

/// M2 = [y_1 a_1 ... y_m a_m]^T with normalized rows.
Matrix classification_operator(const Matrix& samples, const Vector& labels);

/// theta_gamma * PMC(x), with theta_gamma = 2 / gamma on (0, 2) and 1 beyond.
double normalized_pmc_eval(const LimesProblem& problem, const Vector& x, double gamma);

/// Closed-form largest admissible mu for the application, if one exists.
/// For SPCP it is the bound on mu_L + mu_S.
std::optional<double> closed_form_bound(const LimesProblem& problem);

}  // namespace limes
