#pragma once
// Seeded random models shared by the unit and acceptance tests.

#include <random>

#include "batchquad/batch_select.hpp"
#include "batchquad/gaussian_measure.hpp"
#include "batchquad/gp.hpp"
#include "batchquad/warped_bq.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace batchquad;

struct QuadratureCase {
  GaussianMeasure prior;
  KernelParams params;
  Points x;
  Eigen::VectorXd y;    // unwarped targets, used for vanilla BQ
  Eigen::VectorXd ell;  // positive integrand values, used for WSABI
};

// Prior with a random (correlated in 2D) covariance whose standard deviations
// lie in [0.5, 1.2], lengthscale in [0.6, 1.4], 2 to 5 (1D) or 8 (2D)
// observations.
inline QuadratureCase quadrature_case(std::uint64_t seed, int dim) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point mean(dim);
  for (int i = 0; i < dim; ++i) mean[i] = -0.5 + u(rng);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  if (dim == 1) {
    const double sd = 0.5 + 0.7 * u(rng);
    cov(0, 0) = sd * sd;
  } else {
    const double a = 2.0 * M_PI * u(rng);
    Eigen::Matrix2d r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const Eigen::Vector2d sd(0.5 + 0.7 * u(rng), 0.5 + 0.7 * u(rng));
    cov = r * sd.array().square().matrix().asDiagonal() * r.transpose();
  }
  QuadratureCase c{GaussianMeasure(mean, cov), {0.5 + u(rng), 0.6 + 0.8 * u(rng)}, {}, {}, {}};
  // Points at least half a lengthscale apart keep K well conditioned; the
  // closed forms are compared against the oracle, not against roundoff.
  int n = 2 + static_cast<int>(rng() % (dim == 1 ? 4 : 7));
  c.x.resize(n, dim);
  for (int i = 0, tries = 0; i < n; ++tries) {
    if (tries > 10000) {
      n = i;
      c.x.conservativeResize(n, dim);
      break;
    }
    const Point cand = oracle::uniform_points(rng, 1, dim, -2.0, 2.0).row(0).transpose() + mean;
    bool ok = true;
    for (int j = 0; j < i; ++j) ok = ok && (c.x.row(j).transpose() - cand).norm() >= 0.5 * c.params.lengthscale;
    if (ok) c.x.row(i++) = cand.transpose();
  }
  c.y = sample_gp_prior(c.params, c.x, seed ^ 0x5a5aULL);
  c.ell = (c.y.array() * 0.7).exp().matrix();
  return c;
}

// Oracle grid: covers 7 prior standard deviations, steps of at most
// min(lengthscale, sd) / 3.
inline oracle::WeightedGrid grid_for(const QuadratureCase& c, double step_scale = 1.0) {
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.prior.covariance()).eigenvalues();
  const double max_sd = std::sqrt(ev.maxCoeff());
  const double min_sd = std::sqrt(ev.minCoeff());
  const double half = 7.0 * max_sd + 2.0 + 0.5;
  const double step = step_scale * std::min(c.params.lengthscale, min_sd) / 3.0;
  return oracle::measure_grid(c.prior.mean(), c.prior.covariance(), half, step);
}

// A fitted 2D WSABI model over a standard normal prior: 6 to 15 observations
// of a smooth positive integrand, hyperparameters in a moderate range.
inline WarpedModel warped_case(std::uint64_t seed, int dim = 2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 6 + static_cast<int>(rng() % 10);
  const Points x = oracle::uniform_points(rng, n, dim, -2, 2);
  const KernelParams k{0.7 + 0.6 * u(rng), 0.6 + 0.6 * u(rng)};
  const Eigen::VectorXd ell = (0.8 * sample_gp_prior(k, x, seed + 17).array()).exp().matrix();
  return fit_warped(x, ell, k, 0.8);
}

// Base WSABI acquisition of `model` with Lipschitz cones at `centres`.
inline PenalisedAcquisition penalised_case(const WarpedModel& model, const Points& centres) {
  const BatchObjective base = [&model](const Points& q) { return acquisition(model, q); };
  PenalisedAcquisition pa{base, {}, kDefaultSoftMinExponent, kSoftMinFloor};
  for (int i = 0; i < centres.rows(); ++i)
    pa = add_penaliser(pa, centres.row(i).transpose(), base, model.g_model().params().lengthscale);
  return pa;
}

}  // namespace fixture
