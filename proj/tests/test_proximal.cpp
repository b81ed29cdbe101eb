#include "limes/errors.hpp"
#include "limes/proximal.hpp"
#include "oracles.hpp"
#include "property_suites.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace limes;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Vector one(double x) { return Vector::Constant(1, x); }

double scalar_box(double t) { return std::max(0.0, -t); }

}  // namespace

TEST(SeedEval, CatalogValues) {
  EXPECT_DOUBLE_EQ(eval(*make_l1(2), vec({3, -1})), 4.0);
  EXPECT_DOUBLE_EQ(eval(*make_box_support(2), vec({-2, 1})), 2.0);
  EXPECT_NEAR(eval(*make_nuclear(2, 2), vec({3, 0, 0, 1})), 4.0, 1e-12);
}

TEST(SeedEval, DimensionMismatchRejected) {
  EXPECT_THROW(eval(*make_l1(3), vec({1, 2})), InputError);
  EXPECT_THROW(prox(*make_l1(2), vec({1, 2}), 0.0), InputError);
  EXPECT_THROW(make_l1(0), InputError);
}

TEST(Prox, SoftThreshold) {
  EXPECT_DOUBLE_EQ(prox(*make_l1(1), one(3), 1.0)(0), 2.0);
  EXPECT_DOUBLE_EQ(prox(*make_l1(1), one(-0.5), 1.0)(0), 0.0);
  EXPECT_EQ(soft_threshold(vec({-3, 0.2, 1.5}), 1.0), vec({-2, 0, 0.5}));
}

TEST(Prox, NuclearDiagonalCase) {
  const Vector p = prox(*make_nuclear(2, 2), vec({3, 0, 0, 1}), 2.0);
  EXPECT_LE((p - vec({1, 0, 0, 0})).norm(), 1e-12);
}

TEST(Prox, BoxSupportMatchesGridOracle) {
  const auto box = make_box_support(1);
  for (double z : {-0.5, -2.0, 0.7}) {
    const auto [v, fv] = oracle::grid_argmin(
        [&](double u) { return scalar_box(u) + (u - z) * (u - z) / 2.0; }, -10.0, 10.0, 1e-3);
    EXPECT_NEAR(prox(*box, one(z), 1.0)(0), v, 1e-5) << "z=" << z;
  }
  EXPECT_NEAR(prox(*box, one(-0.5), 1.0)(0), 0.0, 1e-15);
  EXPECT_NEAR(prox(*box, one(-2.0), 1.0)(0), -1.0, 1e-15);
  EXPECT_NEAR(prox(*box, one(0.7), 1.0)(0), 0.7, 1e-15);
}

TEST(MoreauEnvelope, L1MatchesGridOracle) {
  const auto l1 = make_l1(1);
  const auto abs_fn = [](double t) { return std::abs(t); };
  EXPECT_DOUBLE_EQ(moreau_envelope(*l1, one(0), 0.7), 0.0);
  EXPECT_NEAR(moreau_envelope(*l1, one(0.5), 1.0), oracle::envelope_1d(abs_fn, 0.5, 1.0), 1e-10);
  EXPECT_NEAR(moreau_envelope(*l1, one(0.5), 1.0), 0.125, 1e-15);
  EXPECT_NEAR(moreau_envelope(*l1, one(2.0), 1.0), oracle::envelope_1d(abs_fn, 2.0, 1.0), 1e-10);
  EXPECT_NEAR(moreau_envelope(*l1, one(2.0), 1.0), 1.5, 1e-15);
}

TEST(MoreauGradient, MatchesFiniteDifferences) {
  const auto l1 = make_l1(1);
  EXPECT_DOUBLE_EQ(moreau_gradient(*l1, one(0), 1.0)(0), 0.0);
  for (double z : {2.0, 0.5}) {
    const Vector fd = oracle::central_gradient(
        [&](const Vector& v) { return moreau_envelope(*l1, v, 1.0); }, one(z), 1e-6);
    EXPECT_NEAR(moreau_gradient(*l1, one(z), 1.0)(0), fd(0), 1e-5);
  }
  EXPECT_NEAR(moreau_gradient(*l1, one(2.0), 1.0)(0), 1.0, 1e-15);
  EXPECT_NEAR(moreau_gradient(*l1, one(0.5), 1.0)(0), 0.5, 1e-15);
}

TEST(ConjugateProx, DecompositionExamples) {
  const auto l1 = make_l1(1);
  EXPECT_NEAR(conjugate_prox(*l1, one(3), 1.0)(0), 1.0, 1e-15);
  EXPECT_NEAR(conjugate_prox(*l1, one(0.4), 1.0)(0), 0.4, 1e-15);
  // Psi* of the box support is the indicator of [-1, 0]: the prox is a clamp.
  const auto [v, fv] = oracle::grid_argmin(
      [](double u) { return (u >= -1.0 && u <= 0.0 ? 0.0 : 1e300) + 0.5 * (u + 2.0) * (u + 2.0); },
      -10.0, 10.0, 1e-3);
  EXPECT_NEAR(conjugate_prox(*make_box_support(1), one(-2), 1.0)(0), v, 1e-5);
  EXPECT_NEAR(conjugate_prox(*make_box_support(1), one(-2), 1.0)(0), -1.0, 1e-15);
}

TEST(ShiftedConjugateProx, ReducesToConjugateProxWithoutShift) {
  std::mt19937_64 rng(4);
  const auto l1 = make_l1(5);
  for (int k = 0; k < 20; ++k) {
    const Vector z = oracle::random_vector(5, rng, 2.0);
    const double mu = suites::uniform(rng, 0.2, 3.0);
    const double sigma = suites::uniform(rng, 0.2, 3.0);
    const auto scaled = make_shifted(l1, Vector::Zero(5), mu);
    EXPECT_LE((shifted_conjugate_prox(*l1, mu, Vector::Zero(5), z, sigma) -
               conjugate_prox(*scaled, z, sigma))
                  .norm(),
              1e-12);
  }
}

TEST(ShiftedConjugateProx, ScalarExamplesMatchGridOracle) {
  const auto l1 = make_l1(1);
  // Conjugate of |v - 3| is the indicator of [-1, 1] plus 3p (mu = 1, c2 = -3).
  const auto shifted_conj = [](double p, double c, double sigma) {
    return [=](double u) {
      return (std::abs(u) <= 1.0 ? -c * u : 1e300) + (u - p) * (u - p) / (2.0 * sigma);
    };
  };
  {
    const double got = shifted_conjugate_prox(*l1, 1.0, one(-3), one(0), 1.0)(0);
    EXPECT_NEAR(got, -1.0, 1e-15);
    EXPECT_NEAR(got, oracle::grid_argmin(shifted_conj(0.0, -3.0, 1.0), -5, 5, 1e-3).first, 1e-5);
  }
  {
    const double got = shifted_conjugate_prox(*l1, 1.0, one(0), one(3), 2.0)(0);
    EXPECT_NEAR(got, 1.0, 1e-15);
    EXPECT_NEAR(got, oracle::grid_argmin(shifted_conj(3.0, 0.0, 2.0), -5, 5, 1e-3).first, 1e-5);
  }
}

TEST(ScaledProx, Examples) {
  const auto l1 = make_l1(1);
  const auto [u, fu] = oracle::grid_argmin(
      [](double t) { return std::abs(t / 2.0) + 0.5 * (1.0 - t) * (1.0 - t); }, -5, 5, 1e-3);
  const Vector got = scaled_prox(*l1, BlockScalarDiagonal::scalar(1, 2.0), one(1));
  EXPECT_NEAR(got(0), 0.5, 1e-15);
  EXPECT_NEAR(got(0), u, 1e-5);
  EXPECT_EQ(scaled_prox(*make_nuclear(2, 2), BlockScalarDiagonal::scalar(4, 3.0), Vector::Zero(4)),
            Vector(Vector::Zero(4)));
  std::mt19937_64 rng(9);
  const Vector v = oracle::random_vector(4, rng);
  EXPECT_LE((scaled_prox(*make_l1(4), BlockScalarDiagonal::scalar(4, 1.0), v) -
             prox(*make_l1(4), v, 1.0))
                .norm(),
            1e-15);
}

TEST(ScaledProx, BlockMisalignmentRejected) {
  std::vector<SeedBlock> blocks;
  blocks.push_back({{0, 2}, 1.0, make_l1(2)});
  blocks.push_back({{2, 4}, 1.0, make_nuclear(2, 2)});
  const auto seed = make_block_sum(std::move(blocks));
  const BlockScalarDiagonal d({{0, 3}, {3, 3}}, {1.0, 2.0});
  EXPECT_THROW(scaled_prox(*seed, d, Vector::Zero(6)), InputError);
  const BlockScalarDiagonal aligned({{0, 2}, {2, 4}}, {1.0, 2.0});
  EXPECT_NO_THROW(scaled_prox(*seed, aligned, Vector::Zero(6)));
}

TEST(BlockSum, RejectsBadPartitions) {
  std::vector<SeedBlock> gap;
  gap.push_back({{0, 2}, 1.0, make_l1(2)});
  gap.push_back({{3, 2}, 1.0, make_l1(2)});
  EXPECT_THROW(make_block_sum(gap), InputError);
  std::vector<SeedBlock> wrong_size;
  wrong_size.push_back({{0, 3}, 1.0, make_l1(2)});
  EXPECT_THROW(make_block_sum(wrong_size), InputError);
}

TEST(ProxCalculus, PropertySuite) {
  const auto report = suites::prox_calculus(60);
  EXPECT_TRUE(suites::all_ok(report)) << suites::describe(report, true);
}

TEST(ProxCalculus, NuclearProxOptimality) {
  const auto m = suites::nuclear_prox_certificate(200);
  EXPECT_TRUE(m.ok()) << suites::describe({m});
}

TEST(ProxCalculus, ConcurrentCallsAgree) {
  const auto nuc = make_nuclear(3, 3);
  std::mt19937_64 rng(1);
  const Vector z = oracle::random_vector(9, rng);
  const Vector ref = prox(*nuc, z, 0.7);
  std::vector<Vector> out(4);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) pool.emplace_back([&, t] { out[t] = prox(*nuc, z, 0.7); });
  for (auto& th : pool) th.join();
  for (const auto& v : out) EXPECT_EQ(v, ref);
}
