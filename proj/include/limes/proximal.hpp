#pragma once

#include "limes/linop.hpp"

#include <memory>
#include <string>
#include <vector>

namespace limes {

enum class SeedKind { l1, nuclear, box_support, block_sum, shifted };

std::string to_string(SeedKind kind);

/// A closed proper convex function with an exact proximity operator.
///
/// Points are flat vectors. Matrix-valued seeds (nuclear norm) read them as
/// row-major rows x cols arrays. The public members validate their arguments and
/// forward to the private hooks.
class ProximableSeed {
 public:
  virtual ~ProximableSeed() = default;

  virtual SeedKind kind() const = 0;
  virtual Index dim() const = 0;
  /// Norms admit the simple necessity tests for the convexity condition.
  virtual bool is_norm() const = 0;
  /// Sum of identical scalar functions of each coordinate.
  virtual bool coordinate_separable() const { return false; }

  double eval(const Vector& z) const;
  /// argmin_v  Psi(v) + |z - v|^2 / (2 gamma).
  Vector prox(const Vector& z, double gamma) const;
  /// Fenchel conjugate, +inf off its domain. Membership tests use a small
  /// absolute slack for points produced by rounding.
  double conjugate_eval(const Vector& p) const;

  /// Same function on a coordinate subrange; only for coordinate-separable seeds.
  virtual std::shared_ptr<const ProximableSeed> restrict_to(Index size) const;

 private:
  virtual double do_eval(const Vector& z) const = 0;
  virtual Vector do_prox(const Vector& z, double gamma) const = 0;
  virtual double do_conjugate_eval(const Vector& p) const = 0;
};

using SeedPtr = std::shared_ptr<const ProximableSeed>;

/// ||z||_1.
SeedPtr make_l1(Index dim);
/// Sum of singular values of the rows x cols matrix stored row-major.
SeedPtr make_nuclear(Index rows, Index cols);
/// Support function of [-1, 0]^dim: sum_i max{0, -z_i}.
SeedPtr make_box_support(Index dim);

struct SeedBlock {
  IndexRange range;
  double weight = 1.0;
  SeedPtr seed;
};

/// sum_b weight_b * Psi_b(z restricted to range_b); ranges partition the domain.
SeedPtr make_block_sum(std::vector<SeedBlock> blocks);

/// z -> scale * Psi(z + offset).
SeedPtr make_shifted(SeedPtr inner, Vector offset, double scale);

/// Access to the block structure of a block-sum seed; nullptr otherwise.
const std::vector<SeedBlock>* seed_blocks(const ProximableSeed& seed);

/// Elementwise sign(a) max{0, |a| - delta}.
Vector soft_threshold(const Vector& z, double delta);

double eval(const ProximableSeed& seed, const Vector& z);
Vector prox(const ProximableSeed& seed, const Vector& z, double gamma);

/// Moreau envelope of index gamma, evaluated through the prox.
double moreau_envelope(const ProximableSeed& seed, const Vector& z, double gamma);

/// (z - prox(z, gamma)) / gamma.
Vector moreau_gradient(const ProximableSeed& seed, const Vector& z, double gamma);

/// Prox of sigma * Psi^* via the decomposition z - sigma prox(z / sigma, 1 / sigma).
Vector conjugate_prox(const ProximableSeed& seed, const Vector& z, double sigma);

/// Moreau envelope of Psi^* of index gamma, computed through conjugate_prox.
double conjugate_moreau_envelope(const ProximableSeed& seed, const Vector& z, double gamma);

/// Prox of sigma * (mu Psi(. + c2))^*:  z + sigma c2 - sigma Prox_{mu Psi / sigma}(z / sigma + c2).
Vector shifted_conjugate_prox(const ProximableSeed& seed, double mu, const Vector& c2,
                              const Vector& z, double sigma);

/// Minimizer of Psi(v) + 0.5 |D (w - v)|^2. Requires Psi to be coordinate
/// separable, block-aligned with D, or D to be a scalar.
Vector weighted_prox(const ProximableSeed& seed, const BlockScalarDiagonal& d, const Vector& w);

/// Prox of Psi o D^{-1}: argmin_u Psi(D^{-1} u) + 0.5 |v - u|^2.
Vector scaled_prox(const ProximableSeed& seed, const BlockScalarDiagonal& d, const Vector& v);

}  // namespace limes
