#include <gtest/gtest.h>

#include "batchquad/warped_bq.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace batchquad;

namespace {

Point p1(double a) { return (Point(1) << a).finished(); }
Points rows1(std::initializer_list<double> v) {
  Points x(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double a : v) x(i++, 0) = a;
  return x;
}
Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) y[i++] = a;
  return y;
}
const GaussianMeasure kStd1 = GaussianMeasure::isotropic(1, 1.0);

// 1D model with ell(0) = 1, alpha = 0.8, s = l = 1.
WarpedModel single_obs() { return fit_warped(rows1({0.0}), vec({1.0}), {1.0, 1.0}, 0.8); }

}  // namespace

TEST(WarpTargets, Examples) {
  const WarpedTargets a = warp_targets(vec({1.0}), 0.8);
  EXPECT_DOUBLE_EQ(a.alpha, 0.8);
  EXPECT_NEAR(a.g[0], 0.632456, 1e-6);
  const WarpedTargets b = warp_targets(vec({0.0, 4.0}), 0.8);
  EXPECT_EQ(b.alpha, 0.0);
  EXPECT_EQ(b.g[0], 0.0);
  EXPECT_DOUBLE_EQ(b.g[1], std::sqrt(8.0));
  const WarpedTargets c = warp_targets(vec({2.5, 2.5, 2.5}), 0.8);
  EXPECT_EQ(c.g[0], c.g[1]);
  EXPECT_EQ(c.g[1], c.g[2]);
  EXPECT_THROW(warp_targets(vec({1.0, -0.1}), 0.8), ArgumentError);
  EXPECT_THROW(warp_targets(Eigen::VectorXd(0), 0.8), ArgumentError);
}

TEST(KernelPriorMean, Examples) {
  EXPECT_NEAR(kernel_prior_mean({1, 1}, kStd1, p1(0.0)), 1.0 / std::sqrt(2.0), 1e-12);
  const double oracle_value = oracle::trapezoid_1d(
      [](double s) { return std::exp(-0.5 * s * s) * std::exp(-0.5 * s * s) / std::sqrt(2 * M_PI); }, -8, 8, 10001);
  EXPECT_NEAR(kernel_prior_mean({1, 1}, kStd1, p1(0.0)), oracle_value, 1e-9);
  // 20 posterior lengthscales sqrt(l^2 + S) away
  EXPECT_LT(kernel_prior_mean({1, 1}, kStd1, p1(20.0 * std::sqrt(2.0))), 1e-10);
  const GaussianMeasure point_mass(p1(0.3), Eigen::MatrixXd::Constant(1, 1, 1e-12));
  EXPECT_NEAR(kernel_prior_mean({1.3, 0.8}, point_mass, p1(1.0)), se_kernel(p1(1.0), p1(0.3), {1.3, 0.8}), 1e-6);
}

TEST(KernelPriorDoubleMean, Examples) {
  EXPECT_NEAR(kernel_prior_double_mean({1, 1}, kStd1), 1.0 / std::sqrt(3.0), 1e-12);
  const double o = oracle::trapezoid_2d(
      [](double a, double b) {
        return std::exp(-0.5 * (a - b) * (a - b)) * std::exp(-0.5 * (a * a + b * b)) / (2 * M_PI);
      },
      -9, 9, -9, 9, 601);
  EXPECT_NEAR(kernel_prior_double_mean({1, 1}, kStd1), o, 1e-9);
  const GaussianMeasure point_mass(p1(0.0), Eigen::MatrixXd::Constant(1, 1, 1e-12));
  EXPECT_NEAR(kernel_prior_double_mean({1.7, 1}, point_mass), 1.7 * 1.7, 1e-9);
  EXPECT_NEAR(kernel_prior_double_mean({2, 1}, kStd1), 4.0 * kernel_prior_double_mean({1, 1}, kStd1), 1e-14);
}

TEST(KernelProductIntegral, Examples) {
  const double o = oracle::trapezoid_1d([](double s) { return std::exp(-s * s) * std::exp(-0.5 * s * s) / std::sqrt(2 * M_PI); },
                                        -8, 8, 10001);
  EXPECT_NEAR(kernel_product_integral({1, 1}, kStd1, p1(0.0), p1(0.0)), o, 1e-10);
  EXPECT_NEAR(o, 1.0 / std::sqrt(3.0), 1e-9);
  std::mt19937_64 rng(1);
  const fixture::QuadratureCase c = fixture::quadrature_case(3, 2);
  for (int i = 0; i < 50; ++i) {
    const Points ab = oracle::uniform_points(rng, 2, 2, -3, 3);
    const Point a = ab.row(0).transpose(), b = ab.row(1).transpose();
    EXPECT_EQ(kernel_product_integral(c.params, c.prior, a, b), kernel_product_integral(c.params, c.prior, b, a));
    EXPECT_LE(kernel_product_integral(c.params, c.prior, a, a), std::pow(c.params.output_scale, 4));
  }
}

// Closed forms against the weighted trapezoid grid, 1D and 2D.
class KernelIntegralOracle : public ::testing::TestWithParam<int> {};

TEST_P(KernelIntegralOracle, MatchesQuadrature) {
  const int dim = GetParam();
  for (int s = 0; s < 4; ++s) {
    const fixture::QuadratureCase c = fixture::quadrature_case(40 + s, dim);
    const oracle::WeightedGrid g = fixture::grid_for(c);
    const double sg = c.params.output_scale, l = c.params.lengthscale;
    const KernelIntegrals ki(c.params, c.prior);
    for (int i = 0; i < c.x.rows(); ++i) {
      const Point xi = c.x.row(i).transpose();
      EXPECT_LT(oracle::relative_error(ki.mean(xi), oracle::grid_kernel_mean(g, xi, sg, l)), 1e-8);
      for (int j = 0; j <= i; ++j) {
        const Point xj = c.x.row(j).transpose();
        EXPECT_LT(oracle::relative_error(ki.product(xi, xj), oracle::grid_kernel_product(g, xi, xj, sg, l)), 1e-8);
      }
    }
    if (dim == 1 || s < 2) {
      EXPECT_LT(oracle::relative_error(ki.double_mean(), oracle::grid_double_mean(g, sg, l)), 1e-8);
    }
    EXPECT_NEAR(ki.double_mean(), kernel_prior_double_mean(c.params, c.prior), 1e-15);
  }
}

INSTANTIATE_TEST_SUITE_P(Dims, KernelIntegralOracle, ::testing::Values(1, 2));

TEST(VanillaBq, Examples) {
  const IntegralEstimate e = vanilla_bq_moments(GpModel(1, {1, 1}), kStd1);
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_NEAR(e.variance, 1.0 / std::sqrt(3.0), 1e-12);
  const GpModel m = fit_gp(rows1({0.0}), vec({1.0}), {1, 1}, 0.0);
  EXPECT_NEAR(vanilla_bq_moments(m, kStd1).mean, 1.0 / std::sqrt(2.0), 1e-12);
  const double o = oracle::trapezoid_1d(
      [&](double s) { return m.posterior_mean(p1(s)) * std::exp(-0.5 * s * s) / std::sqrt(2 * M_PI); }, -9, 9, 4001);
  EXPECT_NEAR(vanilla_bq_moments(m, kStd1).mean, o, 1e-9);
}

TEST(VanillaBq, LinearInTargetsVarianceIndependentOfThem) {
  const fixture::QuadratureCase c = fixture::quadrature_case(5, 2);
  const IntegralEstimate a = vanilla_bq_moments(fit_gp(c.x, c.y, c.params), c.prior);
  const IntegralEstimate b = vanilla_bq_moments(fit_gp(c.x, 3.0 * c.y, c.params), c.prior);
  const IntegralEstimate z = vanilla_bq_moments(fit_gp(c.x, c.ell, c.params), c.prior);
  EXPECT_NEAR(b.mean, 3.0 * a.mean, 1e-12 * std::max(1.0, std::abs(a.mean)));
  EXPECT_EQ(a.variance, b.variance);
  EXPECT_EQ(a.variance, z.variance);
  EXPECT_GE(a.variance, 0.0);
}

TEST(VanillaBq, MatchesQuadratureOracle) {
  for (int dim : {1, 2}) {
    for (int s = 0; s < 3; ++s) {
      const fixture::QuadratureCase c = fixture::quadrature_case(60 + s, dim);
      const oracle::WeightedGrid g = fixture::grid_for(c);
      const double sg = c.params.output_scale, l = c.params.lengthscale;
      const GpModel m = fit_gp(c.x, c.y, c.params, 1e-10);
      const Eigen::MatrixXd kn = oracle::node_kernel(g, c.x, sg, l);
      const Eigen::VectorXd z = kn.transpose() * g.weights;
      const Eigen::VectorXd w = oracle::dense_weights(c.x, c.y, sg, l, 1e-10);
      const double mean = g.weights.dot(kn * w);
      const IntegralEstimate e = vanilla_bq_moments(m, c.prior);
      EXPECT_LT(oracle::relative_error(e.mean, mean, 1e-3), 1e-6);
      if (dim == 1) {
        const double var = oracle::grid_double_mean(g, sg, l) - z.dot(oracle::dense_weights(c.x, z, sg, l, 1e-10));
        EXPECT_NEAR(e.variance, std::max(var, 0.0), 1e-6 * std::max(var, 1e-3));
      }
    }
  }
}

TEST(VanillaBq, VarianceNeverIncreasesWithData) {
  std::mt19937_64 rng(7);
  for (int s = 0; s < 50; ++s) {
    const fixture::QuadratureCase c = fixture::quadrature_case(100 + s, 1 + s % 2);
    const GpModel m = fit_gp(c.x, c.y, c.params);
    const Point extra = oracle::uniform_points(rng, 1, c.x.cols(), -2, 2).row(0).transpose();
    const GpModel m2 = m.with_observation(extra, 0.3);
    EXPECT_LE(vanilla_bq_moments(m2, c.prior).variance, vanilla_bq_moments(m, c.prior).variance + 1e-9);
  }
}

TEST(WsabiMean, Examples) {
  const WarpedModel empty(0.4, GpModel(1, {1, 1}));
  EXPECT_EQ(wsabi_integral_mean(empty, kStd1), 0.4);
  EXPECT_NEAR(wsabi_integral_mean(single_obs(), kStd1), 0.8 + 0.5 * 0.4 / std::sqrt(3.0), 1e-9);
  EXPECT_NEAR(wsabi_integral_mean(single_obs(), kStd1), 0.915470, 1e-6);
}

TEST(WsabiMean, MatchesQuadratureOfImpliedIntegrand) {
  for (int dim : {1, 2}) {
    for (int s = 0; s < 10; ++s) {
      const fixture::QuadratureCase c = fixture::quadrature_case(80 + s, dim);
      const WarpedModel wm = fit_warped(c.x, c.ell, c.params, 0.8);
      const oracle::WeightedGrid g = fixture::grid_for(c);
      const double sg = c.params.output_scale, l = c.params.lengthscale;
      const Eigen::VectorXd w = oracle::dense_weights(c.x, wm.g_model().targets(), sg, l, wm.g_model().jitter());
      const Eigen::VectorXd mg = oracle::node_kernel(g, c.x, sg, l) * w;
      const double o = wm.alpha() + 0.5 * g.weights.dot(mg.array().square().matrix());
      const double got = wsabi_integral_mean(wm, c.prior);
      EXPECT_LT(oracle::relative_error(got, o), 1e-6) << dim << " " << s;
      EXPECT_GE(got, wm.alpha());
    }
  }
}

TEST(WsabiModel, ImpliedIntegrandAtLeastAlpha) {
  const fixture::QuadratureCase c = fixture::quadrature_case(9, 2);
  const WarpedModel wm = fit_warped(c.x, c.ell, c.params, 0.8);
  std::mt19937_64 rng(9);
  const Points q = oracle::uniform_points(rng, 1000, 2, -4, 4);
  for (int i = 0; i < 1000; ++i) EXPECT_GE(wm.implied_mean(q.row(i).transpose()), wm.alpha());
}

namespace {

// Oracle for the WSABI-L variance double integral on a 1D grid.
double wsabi_variance_oracle_1d(const WarpedModel& wm, const GaussianMeasure& prior) {
  const GpModel& gm = wm.g_model();
  const double sg = gm.params().output_scale, l = gm.params().lengthscale;
  const oracle::WeightedGrid g = oracle::measure_grid(prior.mean(), prior.covariance(), 8.0, 0.04);
  const Eigen::MatrixXd kn = oracle::node_kernel(g, gm.inputs(), sg, l);
  const Eigen::VectorXd mg = kn * oracle::dense_weights(gm.inputs(), gm.targets(), sg, l, gm.jitter());
  const Eigen::VectorXd a = g.weights.cwiseProduct(mg);
  // sum_ij a_i a_j [k(s_i, s_j) - k_i^T K^{-1} k_j]
  double prior_part = 0.0;
  for (Eigen::Index i = 0; i < g.nodes.rows(); ++i)
    for (Eigen::Index j = 0; j < g.nodes.rows(); ++j)
      prior_part += a[i] * a[j] * oracle::se(g.nodes.row(i).transpose(), g.nodes.row(j).transpose(), sg, l);
  const Eigen::VectorXd ka = kn.transpose() * a;
  const Eigen::VectorXd sol = oracle::dense_weights(gm.inputs(), ka, sg, l, gm.jitter());
  return prior_part - ka.dot(sol);
}

}  // namespace

TEST(WsabiVariance, Examples) {
  EXPECT_EQ(wsabi_integral_variance(WarpedModel(0.2, GpModel(1, {1, 1})), kStd1, 64, 1), 0.0);
  const WarpedModel m = single_obs();
  const double o = wsabi_variance_oracle_1d(m, kStd1);
  EXPECT_LT(oracle::relative_error(wsabi_integral_variance(m, kStd1, 512, 3), o), 0.05);
  EXPECT_EQ(wsabi_integral_variance(m, kStd1, 128, 3), wsabi_integral_variance(m, kStd1, 128, 3));
}

TEST(WsabiVariance, ObservingTheMeanDoesNotIncreaseIt) {
  const WarpedModel m = single_obs();
  std::mt19937_64 rng(11);
  const Point x = kStd1.sample(rng, 1).row(0).transpose();
  const WarpedModel m2(m.alpha(), m.g_model().with_observation(x, m.g_model().posterior_mean(x)));
  const double before = wsabi_variance_oracle_1d(m, kStd1);
  const double after = wsabi_variance_oracle_1d(m2, kStd1);
  EXPECT_LE(after, before * (1.0 + 1e-9));
  EXPECT_LE(wsabi_integral_variance(m2, kStd1, 512, 3), before * 1.05);
}

TEST(Acquisition, Examples) {
  const WarpedModel m = single_obs();
  const double expected = 0.4 * std::exp(-1.0) * (1.0 - std::exp(-1.0));
  EXPECT_NEAR(acquisition(m, p1(1.0)).value, expected, 1e-9);
  EXPECT_NEAR(acquisition(m, p1(1.0)).value, 0.0930177, 1e-6);
  EXPECT_NEAR(acquisition(m, p1(0.0)).value, 0.0, 1e-9);
  const WarpedModel empty(0.0, GpModel(2, {1, 1}));
  EXPECT_EQ(acquisition(empty, Point(Eigen::Vector2d(0.1, 0.2))).value, 0.0);
}

TEST(Acquisition, NonNegativeZeroAtDataAndGradientMatchesFd) {
  for (int s = 0; s < 5; ++s) {
    const fixture::QuadratureCase c = fixture::quadrature_case(120 + s, 2);
    const WarpedModel wm = fit_warped(c.x, c.ell, c.params, 0.8);
    for (int i = 0; i < c.x.rows(); ++i) EXPECT_NEAR(acquisition(wm, Point(c.x.row(i).transpose())).value, 0.0, 1e-9);
    std::mt19937_64 rng(s);
    const Points q = oracle::uniform_points(rng, 40, 2, -3, 3);
    const BatchEval b = acquisition(wm, q);
    const BatchEval bs = acquisition(wm, q, Exec::kSerial);
    EXPECT_EQ(b.values, bs.values);
    EXPECT_EQ(b.gradients, bs.gradients);
    for (int i = 0; i < 40; ++i) {
      EXPECT_GE(b.values[i], 0.0);
      const Eigen::VectorXd fd = oracle::fd_gradient([&](const Point& z) { return acquisition(wm, z).value; },
                                                     q.row(i).transpose(), 1e-5 * c.params.lengthscale);
      EXPECT_LT(oracle::relative_error(Eigen::VectorXd(b.gradients.row(i).transpose()), fd, 1e-6), 1e-4);
    }
  }
}
