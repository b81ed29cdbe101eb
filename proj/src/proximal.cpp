#include "limes/proximal.hpp"

#include "limes/errors.hpp"

#include <cmath>
#include <limits>

namespace limes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Slack for conjugate-domain membership of points produced by rounding.
constexpr double kDomainSlack = 1e-9;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_dim(const ProximableSeed& seed, const Vector& z, const char* who) {
  if (z.size() != seed.dim()) {
    throw InputError(std::string(who) + ": " + to_string(seed.kind()) + " seed has dimension " +
                     std::to_string(seed.dim()) + ", got a point of length " +
                     std::to_string(z.size()));
  }
}

void check_positive(double value, const char* who, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InputError(std::string(who) + ": " + name + " must be finite and > 0");
  }
}

class L1Seed final : public ProximableSeed {
 public:
  explicit L1Seed(Index dim) : dim_(dim) {}
  SeedKind kind() const override { return SeedKind::l1; }
  Index dim() const override { return dim_; }
  bool is_norm() const override { return true; }
  bool coordinate_separable() const override { return true; }
  SeedPtr restrict_to(Index size) const override { return make_l1(size); }

 private:
  double do_eval(const Vector& z) const override { return z.lpNorm<1>(); }
  Vector do_prox(const Vector& z, double gamma) const override { return soft_threshold(z, gamma); }
  double do_conjugate_eval(const Vector& p) const override {
    return p.size() == 0 || p.lpNorm<Eigen::Infinity>() <= 1.0 + kDomainSlack ? 0.0 : kInf;
  }
  Index dim_;
};

class NuclearSeed final : public ProximableSeed {
 public:
  NuclearSeed(Index rows, Index cols) : rows_(rows), cols_(cols) {}
  SeedKind kind() const override { return SeedKind::nuclear; }
  Index dim() const override { return rows_ * cols_; }
  bool is_norm() const override { return true; }

 private:
  Eigen::Map<const RowMajor> view(const Vector& z) const {
    return Eigen::Map<const RowMajor>(z.data(), rows_, cols_);
  }
  double do_eval(const Vector& z) const override {
    Eigen::JacobiSVD<Matrix> svd(view(z));
    return svd.singularValues().sum();
  }
  Vector do_prox(const Vector& z, double gamma) const override {
    Eigen::JacobiSVD<Matrix> svd(view(z), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const Vector shrunk = (s.array() - gamma).max(0.0).matrix();
    RowMajor out = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
    return Eigen::Map<const Vector>(out.data(), out.size());
  }
  double do_conjugate_eval(const Vector& p) const override {
    Eigen::JacobiSVD<Matrix> svd(view(p));
    const auto& s = svd.singularValues();
    const double top = s.size() ? s(0) : 0.0;
    return top <= 1.0 + kDomainSlack ? 0.0 : kInf;
  }
  Index rows_;
  Index cols_;
};

class BoxSupportSeed final : public ProximableSeed {
 public:
  explicit BoxSupportSeed(Index dim) : dim_(dim) {}
  SeedKind kind() const override { return SeedKind::box_support; }
  Index dim() const override { return dim_; }
  bool is_norm() const override { return false; }
  bool coordinate_separable() const override { return true; }
  SeedPtr restrict_to(Index size) const override { return make_box_support(size); }

 private:
  double do_eval(const Vector& z) const override { return (-z.array()).max(0.0).sum(); }
  // Moreau decomposition: Prox_{gamma sigma_C}(z) = z - gamma P_C(z / gamma), C = [-1, 0]^m.
  Vector do_prox(const Vector& z, double gamma) const override {
    const Vector projected = (z.array() / gamma).max(-1.0).min(0.0).matrix();
    return z - gamma * projected;
  }
  double do_conjugate_eval(const Vector& p) const override {
    if (p.size() == 0) return 0.0;
    const bool inside = p.maxCoeff() <= kDomainSlack && p.minCoeff() >= -1.0 - kDomainSlack;
    return inside ? 0.0 : kInf;
  }
  Index dim_;
};

class BlockSumSeed final : public ProximableSeed {
 public:
  explicit BlockSumSeed(std::vector<SeedBlock> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw InputError("block_sum: no blocks");
    Index next = 0;
    norm_ = true;
    for (const auto& b : blocks_) {
      if (!b.seed) throw InputError("block_sum: null seed");
      if (b.range.begin != next || b.range.size < 1) {
        throw InputError("block_sum: ranges must be contiguous and partition the domain");
      }
      if (b.range.size != b.seed->dim()) {
        throw InputError("block_sum: range size does not match its seed dimension");
      }
      check_positive(b.weight, "block_sum", "weight");
      norm_ = norm_ && b.seed->is_norm();
      next = b.range.end();
    }
    dim_ = next;
  }
  SeedKind kind() const override { return SeedKind::block_sum; }
  Index dim() const override { return dim_; }
  bool is_norm() const override { return norm_; }
  const std::vector<SeedBlock>& blocks() const { return blocks_; }

 private:
  double do_eval(const Vector& z) const override {
    double total = 0.0;
    for (const auto& b : blocks_) {
      total += b.weight * b.seed->eval(z.segment(b.range.begin, b.range.size));
    }
    return total;
  }
  Vector do_prox(const Vector& z, double gamma) const override {
    Vector out(z.size());
    for (const auto& b : blocks_) {
      out.segment(b.range.begin, b.range.size) =
          b.seed->prox(z.segment(b.range.begin, b.range.size), gamma * b.weight);
    }
    return out;
  }
  // (w Psi)^*(p) = w Psi^*(p / w).
  double do_conjugate_eval(const Vector& p) const override {
    double total = 0.0;
    for (const auto& b : blocks_) {
      const Vector part = p.segment(b.range.begin, b.range.size) / b.weight;
      total += b.weight * b.seed->conjugate_eval(part);
    }
    return total;
  }
  std::vector<SeedBlock> blocks_;
  Index dim_ = 0;
  bool norm_ = true;
};

class ShiftedSeed final : public ProximableSeed {
 public:
  ShiftedSeed(SeedPtr inner, Vector offset, double scale)
      : inner_(std::move(inner)), offset_(std::move(offset)), scale_(scale) {
    if (!inner_) throw InputError("shifted: null seed");
    if (offset_.size() != inner_->dim()) throw InputError("shifted: offset length mismatch");
    check_positive(scale_, "shifted", "scale");
  }
  SeedKind kind() const override { return SeedKind::shifted; }
  Index dim() const override { return inner_->dim(); }
  bool is_norm() const override { return false; }

 private:
  double do_eval(const Vector& z) const override { return scale_ * inner_->eval(z + offset_); }
  Vector do_prox(const Vector& z, double gamma) const override {
    return inner_->prox(z + offset_, gamma * scale_) - offset_;
  }
  // (mu Psi(. + c))^*(p) = mu Psi^*(p / mu) - <c, p>.
  double do_conjugate_eval(const Vector& p) const override {
    const double inner = inner_->conjugate_eval(p / scale_);
    if (!std::isfinite(inner)) return inner;
    return scale_ * inner - offset_.dot(p);
  }
  SeedPtr inner_;
  Vector offset_;
  double scale_;
};

}  // namespace

std::string to_string(SeedKind kind) {
  switch (kind) {
    case SeedKind::l1: return "l1";
    case SeedKind::nuclear: return "nuclear";
    case SeedKind::box_support: return "box_support";
    case SeedKind::block_sum: return "block_sum";
    case SeedKind::shifted: return "shifted";
  }
  return "unknown";
}

double ProximableSeed::eval(const Vector& z) const {
  check_dim(*this, z, "eval");
  return do_eval(z);
}

Vector ProximableSeed::prox(const Vector& z, double gamma) const {
  check_dim(*this, z, "prox");
  check_positive(gamma, "prox", "index gamma");
  return do_prox(z, gamma);
}

double ProximableSeed::conjugate_eval(const Vector& p) const {
  check_dim(*this, p, "conjugate_eval");
  return do_conjugate_eval(p);
}

SeedPtr ProximableSeed::restrict_to(Index) const {
  throw InputError("restrict_to: " + to_string(kind()) + " seed is not coordinate separable");
}

SeedPtr make_l1(Index dim) {
  if (dim < 1) throw InputError("l1: dimension must be >= 1");
  return std::make_shared<L1Seed>(dim);
}

SeedPtr make_nuclear(Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw InputError("nuclear: shape must be at least 1x1");
  return std::make_shared<NuclearSeed>(rows, cols);
}

SeedPtr make_box_support(Index dim) {
  if (dim < 1) throw InputError("box_support: dimension must be >= 1");
  return std::make_shared<BoxSupportSeed>(dim);
}

SeedPtr make_block_sum(std::vector<SeedBlock> blocks) {
  return std::make_shared<BlockSumSeed>(std::move(blocks));
}

SeedPtr make_shifted(SeedPtr inner, Vector offset, double scale) {
  return std::make_shared<ShiftedSeed>(std::move(inner), std::move(offset), scale);
}

const std::vector<SeedBlock>* seed_blocks(const ProximableSeed& seed) {
  if (const auto* sum = dynamic_cast<const BlockSumSeed*>(&seed)) return &sum->blocks();
  return nullptr;
}

Vector soft_threshold(const Vector& z, double delta) {
  Vector out(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    const double a = z(i);
    const double mag = std::max(0.0, std::abs(a) - delta);
    out(i) = a >= 0.0 ? mag : -mag;
  }
  return out;
}

double eval(const ProximableSeed& seed, const Vector& z) { return seed.eval(z); }

Vector prox(const ProximableSeed& seed, const Vector& z, double gamma) {
  return seed.prox(z, gamma);
}

double moreau_envelope(const ProximableSeed& seed, const Vector& z, double gamma) {
  const Vector p = seed.prox(z, gamma);
  return seed.eval(p) + 0.5 / gamma * (z - p).squaredNorm();
}

Vector moreau_gradient(const ProximableSeed& seed, const Vector& z, double gamma) {
  return (z - seed.prox(z, gamma)) / gamma;
}

Vector conjugate_prox(const ProximableSeed& seed, const Vector& z, double sigma) {
  check_positive(sigma, "conjugate_prox", "sigma");
  return z - sigma * seed.prox(z / sigma, 1.0 / sigma);
}

double conjugate_moreau_envelope(const ProximableSeed& seed, const Vector& z, double gamma) {
  const Vector p = conjugate_prox(seed, z, gamma);
  return seed.conjugate_eval(p) + 0.5 / gamma * (z - p).squaredNorm();
}

Vector shifted_conjugate_prox(const ProximableSeed& seed, double mu, const Vector& c2,
                              const Vector& z, double sigma) {
  check_positive(mu, "shifted_conjugate_prox", "mu");
  check_positive(sigma, "shifted_conjugate_prox", "sigma");
  if (c2.size() != z.size()) throw InputError("shifted_conjugate_prox: offset length mismatch");
  return z + sigma * c2 - sigma * seed.prox(z / sigma + c2, mu / sigma);
}

Vector weighted_prox(const ProximableSeed& seed, const BlockScalarDiagonal& d, const Vector& w) {
  check_dim(seed, w, "weighted_prox");
  if (d.dim() != seed.dim()) throw InputError("weighted_prox: D dimension mismatch");

  if (d.is_scalar()) {
    const double s = d.scales().front();
    return seed.prox(w, 1.0 / (s * s));
  }

  const auto& dblocks = d.blocks();
  if (seed.coordinate_separable()) {
    Vector out(w.size());
    for (std::size_t b = 0; b < dblocks.size(); ++b) {
      const double s = d.scales()[b];
      const auto part = seed.restrict_to(dblocks[b].size);
      out.segment(dblocks[b].begin, dblocks[b].size) =
          part->prox(w.segment(dblocks[b].begin, dblocks[b].size), 1.0 / (s * s));
    }
    return out;
  }

  if (const auto* blocks = seed_blocks(seed)) {
    // Every seed block must sit inside a single block of D.
    Vector out(w.size());
    std::size_t db = 0;
    for (const auto& sb : *blocks) {
      while (db < dblocks.size() && dblocks[db].end() <= sb.range.begin) ++db;
      if (db == dblocks.size() || sb.range.begin < dblocks[db].begin ||
          sb.range.end() > dblocks[db].end()) {
        throw InputError("weighted_prox: seed blocks are not aligned with the blocks of D");
      }
      const double s = d.scales()[db];
      out.segment(sb.range.begin, sb.range.size) =
          sb.seed->prox(w.segment(sb.range.begin, sb.range.size), sb.weight / (s * s));
    }
    return out;
  }

  throw InputError("weighted_prox: " + to_string(seed.kind()) +
                   " seed is not separable across the blocks of D");
}

Vector scaled_prox(const ProximableSeed& seed, const BlockScalarDiagonal& d, const Vector& v) {
  return d.apply(weighted_prox(seed, d, d.apply_inverse(v)));
}

}  // namespace limes
