#include "limes/bench.hpp"
#include "limes/errors.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace limes;
using namespace limes::bench;

namespace {

Index nonzeros(const Vector& v) { return static_cast<Index>((v.array() != 0.0).count()); }

std::string csv_of(const ExperimentOutcome& o) {
  std::ostringstream out;
  write_trials_csv(out, o);
  write_aggregate_csv(out, o);
  return out.str();
}

ExperimentSpec small_exp_a() {
  ExperimentSpec s = default_spec(ExperimentKind::exp_a);
  s.m = 16;
  s.n = 32;
  s.s = 4;
  s.trials = 2;
  s.tuning.alpha_grid = {0.5, 1.0};
  return s;
}

}  // namespace

TEST(SparseModel, DeterministicWithExactSnrAndSupport) {
  const ExperimentSpec spec = default_spec(ExperimentKind::exp_a);
  const SparseModel a = gen_sparse_model(spec, 3);
  const SparseModel b = gen_sparse_model(spec, 3);
  EXPECT_EQ(a.a, b.a);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(gen_sparse_model(spec, 4).y, a.y);
  EXPECT_EQ(nonzeros(a.x), spec.s);
  const double snr = (a.a * a.x).squaredNorm() / a.noise.squaredNorm();
  EXPECT_NEAR(snr / std::pow(10.0, *spec.snr_db / 10.0), 1.0, 1e-12);
  EXPECT_LE((a.a * a.x + a.noise - a.y).norm(), 1e-12 * a.y.norm());
}

TEST(SparseModel, RejectsOversizedSupport) {
  ExperimentSpec spec = default_spec(ExperimentKind::exp_a);
  spec.s = spec.n + 1;
  EXPECT_THROW(gen_sparse_model(spec, 0), InputError);
}

TEST(SparseModel, TrialSeedsIndependentOfOrder) {
  EXPECT_EQ(trial_seed(1, 5), trial_seed(1, 5));
  EXPECT_NE(trial_seed(1, 5), trial_seed(1, 6));
  EXPECT_NE(trial_seed(1, 5), trial_seed(2, 5));
}

TEST(OutlierModel, ExactSorSnrAndSupport) {
  const ExperimentSpec spec = default_spec(ExperimentKind::exp_b);
  const OutlierModel o = gen_outlier_model(spec, 0);
  const Index support = nonzeros(o.outliers);
  EXPECT_EQ(support, static_cast<Index>(std::lround(spec.outlier_density * spec.m)));
  const double signal = (o.a * o.x).squaredNorm();
  const double sor = (signal / spec.m) / (o.outliers.squaredNorm() / support);
  EXPECT_NEAR(sor / std::pow(10.0, spec.sor_db / 10.0), 1.0, 1e-12);
  EXPECT_NEAR(signal / o.noise.squaredNorm() / std::pow(10.0, *spec.snr_db / 10.0), 1.0, 1e-12);
  EXPECT_LE((o.a * o.x + o.noise + o.outliers - o.y).norm(), 1e-12 * o.y.norm());
}

TEST(OutlierModel, ZeroDensityHasNoOutliers) {
  ExperimentSpec spec = default_spec(ExperimentKind::exp_b);
  spec.outlier_density = 0.0;
  const OutlierModel o = gen_outlier_model(spec, 1);
  EXPECT_EQ(o.outliers.norm(), 0.0);
  EXPECT_LE((o.a * o.x + o.noise - o.y).norm(), 1e-12 * o.y.norm());
}

TEST(SpcpModel, ZeroCaseRankAndDeterminism) {
  EXPECT_EQ(gen_spcp_model(5, 6, 0, 0.0, 0.0, 1).y.norm(), 0.0);
  const SpcpModel a = gen_spcp_model(12, 10, 3, 0.1, 0.01, 9);
  const SpcpModel b = gen_spcp_model(12, 10, 3, 0.1, 0.01, 9);
  EXPECT_EQ(a.y, b.y);
  const Vector sv = oracle::jacobi_eigenvalues(a.low_rank.transpose() * a.low_rank);
  const double top = sv.maxCoeff();
  EXPECT_EQ((sv.array() > 1e-10 * top).count(), 3);
  EXPECT_LE((a.low_rank + a.sparse + a.noise - a.y).norm(), 1e-12 * a.y.norm());
}

TEST(Hoyer, Examples) {
  Vector spike = Vector::Zero(7);
  spike(4) = -2.5;
  EXPECT_NEAR(hoyer_sparseness(spike), 1.0, 1e-15);
  EXPECT_NEAR(hoyer_sparseness(Vector::Constant(9, 1.3)), 0.0, 1e-12);
  Vector v(4);
  v << 3, 1, 0, 0;
  const double direct = (4.0 / (4.0 - 2.0)) * (1.0 - 4.0 / (2.0 * std::sqrt(10.0)));
  EXPECT_NEAR(hoyer_sparseness(v), direct, 1e-14);
  EXPECT_NEAR(hoyer_sparseness(v), 0.7351, 1e-4);
  EXPECT_EQ(hoyer_sparseness(Vector::Zero(5)), 1.0);
}

TEST(Hoyer, StaysInUnitInterval) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    Vector v = oracle::random_vector(1 + k % 12, rng);
    if (k % 3 == 0) v(0) = 0.0;
    const double h = hoyer_sparseness(v);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, 1.0);
  }
}

TEST(Mismatch, Examples) {
  const Vector x = Vector::LinSpaced(4, -1.0, 2.0);
  EXPECT_EQ(system_mismatch(x, x), 0.0);
  EXPECT_DOUBLE_EQ(system_mismatch(x, Vector::Zero(4)), 1.0);
  EXPECT_DOUBLE_EQ(system_mismatch(x, 2.0 * x), 1.0);
  EXPECT_THROW(system_mismatch(Vector::Zero(4), x), InputError);
}

TEST(Tuning, SelfConsistentTarget) {
  std::mt19937_64 rng(3);
  const Matrix a = oracle::random_matrix(16, 32, rng);
  const Vector y = oracle::random_vector(16, rng, 2.0);
  const double top = (a.transpose() * y).lpNorm<Eigen::Infinity>();
  const SparseSolveFn solve = [&](double mu, const std::optional<Vector>& warm) {
    SolverConfig c;
    c.rel_tol = 1e-10;
    return ista(a, y, mu, c, warm);
  };
  const double target = hoyer_sparseness(solve(0.2 * top, {}).x);
  const TuningSpec tuning = default_tuning();
  const TuneOutcome t = tune_mu_to_sparseness(solve, 1e-6 * top, 1.5 * top, target, tuning);
  ASSERT_TRUE(t.ok) << t.note;
  EXPECT_LE(std::abs(t.sparseness - target), tuning.sparseness_tol);

  EXPECT_EQ(solve(1.5 * top, {}).x.norm(), 0.0);
  EXPECT_EQ(hoyer_sparseness(solve(1.5 * top, {}).x), 1.0);

  const double floor = hoyer_sparseness(solve(1e-6 * top, {}).x);
  const TuneOutcome bad =
      tune_mu_to_sparseness(solve, 1e-6 * top, 1.5 * top, 0.5 * floor, tuning);
  EXPECT_FALSE(bad.ok);
  EXPECT_FALSE(bad.note.empty());
}

TEST(Baselines, OlsAndRidgeLimit) {
  std::mt19937_64 rng(6);
  const Matrix sq = oracle::random_matrix(5, 5, rng);
  const Vector y = oracle::random_vector(5, rng);
  const Vector exact = sq.fullPivLu().solve(y);
  EXPECT_LE((baseline_ols(sq, y) - exact).norm(), 1e-10 * exact.norm());
  const Matrix tall = oracle::random_matrix(12, 4, rng);
  const Vector yt = oracle::random_vector(12, rng);
  const Vector ols = baseline_ols(tall, yt);
  double last = (baseline_ridge(tall, yt, 1.0) - ols).norm();
  for (double lambda : {1e-2, 1e-4, 1e-6}) {
    const double gap = (baseline_ridge(tall, yt, lambda) - ols).norm();
    EXPECT_LT(gap, last);
    last = gap;
  }
  EXPECT_LE(last, 1e-5);
}

TEST(Baselines, OlsIsMinimumNorm) {
  Matrix wide(1, 2);
  wide << 1.0, 1.0;
  const Vector x = baseline_ols(wide, Vector::Constant(1, 2.0));
  EXPECT_NEAR(x(0), 1.0, 1e-12);
  EXPECT_NEAR(x(1), 1.0, 1e-12);
}

TEST(Baselines, HuberAndLadRidgeOneDimensional) {
  const Matrix a = Matrix::Identity(1, 1);
  const Vector y = Vector::Constant(1, 5.0);
  SolverConfig c;
  c.rel_tol = 1e-13;
  c.max_iter = 200000;
  const auto huber_obj = [](double x) {
    const double r = std::abs(x - 5.0);
    return (r <= 1.0 ? 0.5 * r * r : r - 0.5) + 0.05 * x * x;
  };
  const double grid = oracle::grid_argmin(huber_obj, -20.0, 20.0, 1e-5).first;
  EXPECT_NEAR(baseline_huber(a, y, 1.0, 0.1, c).x(0), grid, 1e-4);
  const double lad_grid = oracle::grid_argmin(
      [](double x) { return std::abs(x - 5.0) + 0.5 * x * x; }, -10.0, 10.0, 1e-5).first;
  const double lad = baseline_lad_ridge(a, y, 1.0, c).x(0);
  EXPECT_NEAR(lad, 1.0, 1e-4);
  EXPECT_NEAR(lad, lad_grid, 1e-4);
}

TEST(Baselines, TruncatedSvdRecoversLowRank) {
  const SpcpModel m = gen_spcp_model(8, 6, 2, 0.0, 0.0, 4);
  EXPECT_LE((truncated_svd(m.y, 2) - m.low_rank).norm(), 1e-10 * m.low_rank.norm());
  EXPECT_EQ(truncated_svd(m.y, 0).norm(), 0.0);
}

TEST(RunExperiment, OlsOnExactOverdeterminedData) {
  ExperimentSpec spec = default_spec(ExperimentKind::exp_b);
  spec.snr_db.reset();
  spec.outlier_density = 0.0;
  spec.trials = 1;
  spec.methods = {"ols"};
  const auto o = run_experiment(spec, 1);
  ASSERT_EQ(o.trials.size(), 1u);
  EXPECT_TRUE(o.trials[0].valid);
  EXPECT_LE(o.trials[0].mismatch, 1e-20);
}

TEST(RunExperiment, CsvHeadersAndDeterminism) {
  const ExperimentSpec spec = small_exp_a();
  const auto a = run_experiment(spec, 1);
  const auto b = run_experiment(spec, 2);
  EXPECT_EQ(csv_of(a), csv_of(b));
  std::ostringstream trials, agg;
  write_trials_csv(trials, a);
  write_aggregate_csv(agg, a);
  EXPECT_EQ(trials.str().substr(0, trials.str().find('\n')),
            "experiment,trial,method,m,n,s,snr_db,sor_db,density,mu,gamma,mismatch,sparseness,"
            "iterations,wallclock_ms");
  EXPECT_EQ(agg.str().substr(0, agg.str().find('\n')),
            "method,mean_mismatch,stderr_mismatch,n_trials");
  ASSERT_EQ(a.trials.size(), spec.trials * spec.methods.size());
  for (std::size_t k = 1; k < a.trials.size(); ++k) {
    EXPECT_LE(a.trials[k - 1].trial, a.trials[k].trial);
  }
  for (const auto& t : a.trials) {
    EXPECT_GE(t.mismatch, 0.0);
    EXPECT_GE(t.sparseness, 0.0);
    EXPECT_LE(t.sparseness, 1.0);
    EXPECT_EQ(t.wallclock_ms, 0.0);
  }
}

TEST(RunExperiment, TrialResultsIndependentOfOrder) {
  const ExperimentSpec spec = small_exp_a();
  const auto all = run_experiment(spec, 1);
  const auto second = run_trial(spec, 1);
  std::vector<TrialResult> from_all;
  for (const auto& t : all.trials) {
    if (t.trial == 1) from_all.push_back(t);
  }
  ASSERT_EQ(from_all.size(), second.size());
  for (std::size_t k = 0; k < second.size(); ++k) {
    EXPECT_EQ(from_all[k].mismatch, second[k].mismatch);
    EXPECT_EQ(from_all[k].mu, second[k].mu);
  }
}

TEST(RunExperiment, AggregateIgnoresInvalidTrials) {
  std::vector<TrialResult> trials(3);
  trials[0] = {0, "m", 0, 0, 1.0};
  trials[1] = {1, "m", 0, 0, 3.0};
  trials[2] = {2, "m", 0, 0, 100.0};
  trials[2].valid = false;
  const auto rows = aggregate(trials, {"m"});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].n_trials, 2);
  EXPECT_DOUBLE_EQ(rows[0].mean_mismatch, 2.0);
  EXPECT_DOUBLE_EQ(rows[0].stderr_mismatch, std::sqrt(2.0) / std::sqrt(2.0));
}

TEST(SpecJson, RoundTripAndStrictness) {
  ExperimentSpec spec = small_exp_a();
  spec.master_seed = 99;
  const ExperimentSpec back = spec_from_json(to_json(spec));
  EXPECT_EQ(back.m, spec.m);
  EXPECT_EQ(back.s, spec.s);
  EXPECT_EQ(back.master_seed, 99u);
  EXPECT_EQ(back.methods, spec.methods);
  EXPECT_EQ(back.tuning.alpha_grid, spec.tuning.alpha_grid);
  EXPECT_EQ(to_json(back), to_json(spec));

  using nlohmann::json;
  EXPECT_THROW(spec_from_json(json::parse(R"({"experiment": "exp_a", "bogus": 1})")),
               std::invalid_argument);
  EXPECT_THROW(spec_from_json(json::parse(R"({"experiment": "exp_a", "tuning": {"x": 1}})")),
               std::invalid_argument);
  EXPECT_THROW(spec_from_json(json::parse(R"({"experiment": "exp_z"})")), std::invalid_argument);
  EXPECT_THROW(spec_from_json(json::parse(R"({"experiment": "exp_a", "trials": 0})")),
               std::invalid_argument);
  EXPECT_THROW(spec_from_json(json::parse(R"({"experiment": "exp_b", "outlier_density": 2})")),
               std::invalid_argument);
  const ExperimentSpec noiseless =
      spec_from_json(json::parse(R"({"experiment": "exp_a", "snr_db": null})"));
  EXPECT_FALSE(noiseless.snr_db.has_value());
}

TEST(Logspace, Endpoints) {
  const auto g = logspace(-1.0, 1.0, 5);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g.front(), 0.1);
  EXPECT_DOUBLE_EQ(g[2], 1.0);
  EXPECT_DOUBLE_EQ(g.back(), 10.0);
}
