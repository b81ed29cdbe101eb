#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <memory>
#include <vector>

namespace limes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using SparseMatrix = Eigen::SparseMatrix<double>;
using SparsePtr = std::shared_ptr<const SparseMatrix>;

/// Sparse copy of `m` when it is large and mostly zero; nullptr otherwise.
/// Products through the copy are used only as an internal shortcut.
SparsePtr sparse_copy_if_worthwhile(const Matrix& m);

/// Half-open coordinate range [begin, begin + size).
struct IndexRange {
  Index begin = 0;
  Index size = 0;

  Index end() const { return begin + size; }
  bool operator==(const IndexRange&) const = default;
};

/// x -> M x + c.
class AffineOperator {
 public:
  AffineOperator(Matrix matrix, Vector offset);
  explicit AffineOperator(Matrix matrix);

  static AffineOperator identity(Index n);

  const Matrix& matrix() const { return matrix_; }
  const Vector& offset() const { return offset_; }
  Index rows() const { return matrix_.rows(); }
  Index cols() const { return matrix_.cols(); }

  /// True when the linear part is exactly the square identity.
  bool linear_is_identity() const { return identity_; }
  bool has_offset() const { return has_offset_; }

  Vector apply(const Vector& x) const;
  /// Applies M^T only; the offset does not enter the adjoint.
  Vector adjoint_apply(const Vector& z) const;
  /// M x without the offset.
  Vector apply_linear(const Vector& x) const;

 private:
  Matrix matrix_;
  Vector offset_;
  SparsePtr sparse_;
  bool identity_ = false;
  bool has_offset_ = false;
};

/// Diagonal operator that is a positive scalar multiple of the identity on each
/// block of a contiguous partition of the coordinates.
class BlockScalarDiagonal {
 public:
  BlockScalarDiagonal(std::vector<IndexRange> blocks, std::vector<double> scales);

  static BlockScalarDiagonal scalar(Index dim, double scale);

  Index dim() const { return dim_; }
  const std::vector<IndexRange>& blocks() const { return blocks_; }
  const std::vector<double>& scales() const { return scales_; }
  bool is_scalar() const { return blocks_.size() == 1; }
  double max_scale() const;

  Vector apply(const Vector& v) const;
  Vector apply_inverse(const Vector& v) const;
  Vector apply_squared(const Vector& v) const;
  Vector diagonal() const;

 private:
  std::vector<IndexRange> blocks_;
  std::vector<double> scales_;
  Index dim_ = 0;
};

/// Singular values strictly above this value count toward the numerical rank.
double rank_cutoff(double sigma_max, Index rows, Index cols);

Index numerical_rank(const Matrix& m);

/// Orthogonal projector onto range(A^T); equals pinv(A) * A.
Matrix projector_range_adjoint(const Matrix& a);

/// Minimum-norm pseudoinverse with the linop rank cutoff.
Matrix pseudo_inverse(const Matrix& a);

/// Largest eigenvalue of M^T M by power iteration.
double lambda_max_gram(const Matrix& m);

/// Smallest eigenvalue of M^T M above the rank cutoff.
double lambda_min_pp_gram(const Matrix& m);

/// Spectral norm ||M||.
double operator_norm(const Matrix& m);

/// The (n-1) x n forward difference matrix with rows (..., -1, 1, ...).
Matrix first_difference(Index n);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace limes
