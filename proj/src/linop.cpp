#include "limes/linop.hpp"

#include "limes/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace limes {

namespace {

constexpr double kPowerTol = 1e-10;
constexpr int kPowerMaxIter = 200000;

void require_nonzero(const Matrix& m, const char* who) {
  if (m.size() == 0) {
    throw InputError(std::string(who) + ": empty matrix");
  }
  if (!all_finite(m)) {
    throw InputError(std::string(who) + ": non-finite entry");
  }
  if (m.cwiseAbs().maxCoeff() == 0.0) {
    throw InputError(std::string(who) + ": zero matrix");
  }
}

// Fixed start vector: normalized all-ones with a deterministic perturbation.
Vector power_start(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = 1.0 + 0.25 * std::sin(static_cast<double>(i) + 1.0);
  }
  return v.normalized();
}

}  // namespace

SparsePtr sparse_copy_if_worthwhile(const Matrix& m) {
  constexpr Index kMinEntries = 4096;
  constexpr double kMaxDensity = 0.05;
  if (m.size() < kMinEntries) return nullptr;
  const Index nnz = (m.array() != 0.0).count();
  if (static_cast<double>(nnz) > kMaxDensity * static_cast<double>(m.size())) return nullptr;
  return std::make_shared<const SparseMatrix>(m.sparseView(0.0, 0.0));
}

AffineOperator::AffineOperator(Matrix matrix, Vector offset)
    : matrix_(std::move(matrix)), offset_(std::move(offset)) {
  if (matrix_.rows() < 1 || matrix_.cols() < 1) {
    throw InputError("AffineOperator: matrix must be at least 1x1");
  }
  if (offset_.size() != matrix_.rows()) {
    throw InputError("AffineOperator: offset length " + std::to_string(offset_.size()) +
                     " does not match " + std::to_string(matrix_.rows()) + " rows");
  }
  if (!all_finite(matrix_) || !all_finite(offset_)) {
    throw InputError("AffineOperator: non-finite entry");
  }
  identity_ = matrix_.rows() == matrix_.cols() && matrix_.isIdentity(0.0);
  has_offset_ = offset_.size() > 0 && offset_.cwiseAbs().maxCoeff() > 0.0;
  if (!identity_) sparse_ = sparse_copy_if_worthwhile(matrix_);
}

AffineOperator::AffineOperator(Matrix matrix)
    : AffineOperator(matrix, Vector::Zero(matrix.rows())) {}

AffineOperator AffineOperator::identity(Index n) {
  return AffineOperator(Matrix::Identity(n, n));
}

Vector AffineOperator::apply_linear(const Vector& x) const {
  if (x.size() != matrix_.cols()) {
    throw InputError("AffineOperator::apply: expected length " + std::to_string(matrix_.cols()) +
                     ", got " + std::to_string(x.size()));
  }
  if (identity_) return x;
  if (sparse_) return *sparse_ * x;
  return matrix_ * x;
}

Vector AffineOperator::apply(const Vector& x) const {
  Vector out = apply_linear(x);
  if (has_offset_) out += offset_;
  return out;
}

Vector AffineOperator::adjoint_apply(const Vector& z) const {
  if (z.size() != matrix_.rows()) {
    throw InputError("AffineOperator::adjoint_apply: expected length " +
                     std::to_string(matrix_.rows()) + ", got " + std::to_string(z.size()));
  }
  if (identity_) return z;
  if (sparse_) return sparse_->transpose() * z;
  return matrix_.transpose() * z;
}

BlockScalarDiagonal::BlockScalarDiagonal(std::vector<IndexRange> blocks,
                                         std::vector<double> scales)
    : blocks_(std::move(blocks)), scales_(std::move(scales)) {
  if (blocks_.empty() || blocks_.size() != scales_.size()) {
    throw InputError("BlockScalarDiagonal: need one scale per block");
  }
  Index next = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].begin != next || blocks_[b].size < 1) {
      throw InputError("BlockScalarDiagonal: blocks must be contiguous and non-empty");
    }
    if (!(scales_[b] > 0.0) || !std::isfinite(scales_[b])) {
      throw InputError("BlockScalarDiagonal: scales must be finite and > 0");
    }
    next = blocks_[b].end();
  }
  dim_ = next;
}

BlockScalarDiagonal BlockScalarDiagonal::scalar(Index dim, double scale) {
  return BlockScalarDiagonal({IndexRange{0, dim}}, {scale});
}

double BlockScalarDiagonal::max_scale() const {
  return *std::max_element(scales_.begin(), scales_.end());
}

Vector BlockScalarDiagonal::apply(const Vector& v) const {
  if (v.size() != dim_) throw InputError("BlockScalarDiagonal: dimension mismatch");
  Vector out(v.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    out.segment(blocks_[b].begin, blocks_[b].size) =
        scales_[b] * v.segment(blocks_[b].begin, blocks_[b].size);
  }
  return out;
}

Vector BlockScalarDiagonal::apply_inverse(const Vector& v) const {
  if (v.size() != dim_) throw InputError("BlockScalarDiagonal: dimension mismatch");
  Vector out(v.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    out.segment(blocks_[b].begin, blocks_[b].size) =
        v.segment(blocks_[b].begin, blocks_[b].size) / scales_[b];
  }
  return out;
}

Vector BlockScalarDiagonal::apply_squared(const Vector& v) const {
  if (v.size() != dim_) throw InputError("BlockScalarDiagonal: dimension mismatch");
  Vector out(v.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const double d2 = scales_[b] * scales_[b];
    out.segment(blocks_[b].begin, blocks_[b].size) =
        d2 * v.segment(blocks_[b].begin, blocks_[b].size);
  }
  return out;
}

Vector BlockScalarDiagonal::diagonal() const {
  Vector d(dim_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    d.segment(blocks_[b].begin, blocks_[b].size).setConstant(scales_[b]);
  }
  return d;
}

double rank_cutoff(double sigma_max, Index rows, Index cols) {
  return static_cast<double>(std::max(rows, cols)) * sigma_max * 1e-12;
}

Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = rank_cutoff(s(0), m.rows(), m.cols());
  return (s.array() > cut).count();
}

Matrix projector_range_adjoint(const Matrix& a) {
  require_nonzero(a, "projector_range_adjoint");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = rank_cutoff(s(0), a.rows(), a.cols());
  const Index r = (s.array() > cut).count();
  const Matrix v = svd.matrixV().leftCols(r);
  Matrix p = v * v.transpose();
  // Symmetrize so P == P^T holds bitwise.
  return 0.5 * (p + p.transpose());
}

Matrix pseudo_inverse(const Matrix& a) {
  require_nonzero(a, "pseudo_inverse");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = rank_cutoff(s(0), a.rows(), a.cols());
  Vector inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

double lambda_max_gram(const Matrix& m) {
  require_nonzero(m, "lambda_max_gram");
  // Power iteration on the smaller of M^T M and M M^T; their nonzero spectra agree.
  const bool use_cols = m.cols() <= m.rows();
  const Index n = use_cols ? m.cols() : m.rows();
  auto gram = [&](const Vector& v) -> Vector {
    if (use_cols) return m.transpose() * (m * v);
    return m * (m.transpose() * v);
  };

  Vector v = power_start(n);
  Vector w = gram(v);
  double rho = v.dot(w);
  int stagnant = 0;
  for (int it = 0; it < kPowerMaxIter; ++it) {
    const double wn = w.norm();
    if (wn == 0.0) {
      throw NumericalError("lambda_max_gram: start vector in the null space");
    }
    const double residual = (w - rho * v).norm();
    if (residual <= kPowerTol * rho) return rho;
    v = w / wn;
    w = gram(v);
    const double next = v.dot(w);
    // The residual cannot drop below rounding level; accept a Rayleigh quotient
    // that has stopped moving.
    if (std::abs(next - rho) <= 1e-15 * next) {
      if (++stagnant >= 50) return next;
    } else {
      stagnant = 0;
    }
    rho = next;
  }
  throw NumericalError("lambda_max_gram: power iteration did not converge");
}

double lambda_min_pp_gram(const Matrix& m) {
  require_nonzero(m, "lambda_min_pp_gram");
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double cut = rank_cutoff(s(0), m.rows(), m.cols());
  double smallest = -1.0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) smallest = s(i);
  }
  if (smallest <= 0.0) {
    throw NumericalError("lambda_min_pp_gram: all singular values below the rank cutoff");
  }
  return smallest * smallest;
}

double operator_norm(const Matrix& m) { return std::sqrt(lambda_max_gram(m)); }

Matrix first_difference(Index n) {
  if (n < 2) throw InputError("first_difference: n must be >= 2");
  Matrix d = Matrix::Zero(n - 1, n);
  for (Index i = 0; i + 1 < n; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return d;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace limes
