#pragma once

// Independent reference computations used to check the library. None of these
// call into the code under test.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline Vector jacobi_eigenvalues(Matrix a, double tol = 1e-14, int max_sweeps = 100) {
  const Index n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= tol * (1.0 + a.norm())) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vector ev = a.diagonal();
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

/// Orthonormal basis (as columns) of the span of the rows of `a`, by modified
/// Gram-Schmidt with one reorthogonalization pass.
inline Matrix gram_schmidt_rows(const Matrix& a, double tol = 1e-10) {
  std::vector<Vector> basis;
  const double scale = std::max(1.0, a.norm());
  for (Index i = 0; i < a.rows(); ++i) {
    Vector v = a.row(i).transpose();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) v -= q.dot(v) * q;
    }
    const double nv = v.norm();
    if (nv > tol * scale) basis.push_back(v / nv);
  }
  Matrix q(a.cols(), static_cast<Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) q.col(static_cast<Index>(k)) = basis[k];
  return q;
}

/// Minimizer of a scalar function on a uniform grid, then refined on a finer
/// grid around the coarse winner.
inline std::pair<double, double> grid_argmin(const std::function<double(double)>& f, double lo,
                                             double hi, double step) {
  double best_x = lo;
  double best_f = f(lo);
  const long count = static_cast<long>(std::floor((hi - lo) / step));
  for (long k = 1; k <= count; ++k) {
    const double x = lo + step * static_cast<double>(k);
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  const double fine = step / 1000.0;
  const double start = best_x - step;
  for (int k = 0; k <= 2000; ++k) {
    const double x = start + fine * k;
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  return {best_x, best_f};
}

/// Central finite-difference gradient.
inline Vector central_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                               double h = 1e-6) {
  Vector g(x.size());
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const double fp = f(xp);
    xp(i) = xi - h;
    const double fm = f(xp);
    xp(i) = xi;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Cyclic coordinate descent for 0.5|Ax - y|^2 + mu |x|_1.
inline Vector lasso_coordinate_descent(const Matrix& a, const Vector& y, double mu,
                                       double tol = 1e-13, int max_sweeps = 200000) {
  Vector x = Vector::Zero(a.cols());
  Vector r = y;
  const Vector col_sq = a.colwise().squaredNorm().transpose();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double biggest = 0.0;
    for (Index j = 0; j < a.cols(); ++j) {
      const double old = x(j);
      const double rho = a.col(j).dot(r) + col_sq(j) * old;
      const double mag = std::max(0.0, std::abs(rho) - mu);
      const double next = (rho >= 0 ? mag : -mag) / col_sq(j);
      if (next != old) {
        r -= (next - old) * a.col(j);
        x(j) = next;
        biggest = std::max(biggest, std::abs(next - old));
      }
    }
    if (biggest <= tol) break;
  }
  return x;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Vector random_vector(Index size, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n;
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = scale * n(rng);
  return v;
}

/// Minimizer of a convex scalar function: grid bracket, then golden-section
/// search inside the bracket down to a few ulps.
inline std::pair<double, double> convex_argmin_1d(const std::function<double(double)>& f, double lo,
                                                  double hi, double step) {
  const double coarse = grid_argmin(f, lo, hi, step).first;
  double a = coarse - 2.0 * step / 1000.0;
  double b = coarse + 2.0 * step / 1000.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

/// 1-D Moreau envelope of a convex scalar function by grid minimization.
inline double envelope_1d(const std::function<double(double)>& f, double z, double gamma,
                          double radius = 20.0, double step = 1e-3) {
  return convex_argmin_1d([&](double v) { return f(v) + (v - z) * (v - z) / (2.0 * gamma); },
                          z - radius, z + radius, step)
      .second;
}

/// Closed-form envelope of |t| (the Huber function), summed over coordinates.
inline double huber(const Vector& z, double gamma) {
  double out = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double a = std::abs(z(i));
    out += a <= gamma ? a * a / (2.0 * gamma) : a - gamma / 2.0;
  }
  return out;
}

/// Closed-form envelope of max{0, -t}, summed over coordinates.
inline double box_envelope(const Vector& z, double gamma) {
  double out = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double t = z(i);
    if (t >= 0.0) continue;
    out += t >= -gamma ? t * t / (2.0 * gamma) : -t - gamma / 2.0;
  }
  return out;
}

inline double box_support(const Vector& z) { return (-z.array()).max(0.0).sum(); }

/// Singular values of the row-major rows x cols matrix stored in z, via Jacobi
/// on the smaller Gram matrix.
inline Vector singular_values(const Vector& z, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = z(i * cols + j);
  }
  const Matrix g = rows <= cols ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  Vector ev = jacobi_eigenvalues(g);
  for (Index i = 0; i < ev.size(); ++i) ev(i) = std::sqrt(std::max(0.0, ev(i)));
  return ev;
}

inline double nuclear(const Vector& z, Index rows, Index cols) {
  return singular_values(z, rows, cols).sum();
}

/// Envelope of the nuclear norm: Huber applied to the singular values.
inline double nuclear_envelope(const Vector& z, Index rows, Index cols, double gamma) {
  return huber(singular_values(z, rows, cols), gamma);
}

}  // namespace oracle
