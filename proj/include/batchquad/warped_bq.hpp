#pragma once

#include <cstdint>
#include <vector>

#include "batchquad/gaussian_measure.hpp"
#include "batchquad/gp.hpp"

namespace batchquad {

inline constexpr double kDefaultMinFraction = 0.8;
inline constexpr int kDefaultVarianceSamples = 512;

struct WarpedTargets {
  double alpha = 0.0;
  Eigen::VectorXd g;
};

// alpha = min_fraction * min(ell); g_i = sqrt(2 (ell_i - alpha)).
WarpedTargets warp_targets(const Eigen::VectorXd& ell, double min_fraction);

// Closed-form integrals of the SE kernel against a Gaussian measure.
// Factorisations that depend only on (params, prior) are done once.
class KernelIntegrals {
 public:
  KernelIntegrals(const KernelParams& params, const GaussianMeasure& prior);

  // int k(x, s) pi(s) ds
  double mean(const Point& x) const;
  Eigen::VectorXd mean(const Points& x) const;
  // int int k(s, s') pi(s) pi(s') ds ds'
  double double_mean() const { return double_mean_; }
  // Gamma(a, b) = int k(a, s) k(s, b) pi(s) ds
  double product(const Point& a, const Point& b) const;
  Eigen::MatrixXd product(const Points& x) const;

 private:
  KernelParams params_;
  Point prior_mean_;
  Eigen::LLT<Eigen::MatrixXd> single_;  // l^2 I + S
  Eigen::LLT<Eigen::MatrixXd> half_;    // l^2/2 I + S
  double single_scale_ = 0.0;           // s^2 |I + S/l^2|^{-1/2}
  double product_scale_ = 0.0;          // s^4 |I + 2S/l^2|^{-1/2}
  double double_mean_ = 0.0;
};

double kernel_prior_mean(const KernelParams& params, const GaussianMeasure& prior, const Point& x);
double kernel_prior_double_mean(const KernelParams& params, const GaussianMeasure& prior);
double kernel_product_integral(const KernelParams& params, const GaussianMeasure& prior, const Point& a,
                               const Point& b);

struct IntegralEstimate {
  double mean = 0.0;
  double variance = 0.0;
};

// Unwarped BQ: moments of int f pi under the GP posterior on f.
IntegralEstimate vanilla_bq_moments(const GpModel& model, const GaussianMeasure& prior);

// WSABI-L model: ell(x) ~= alpha + g(x)^2 / 2 with a GP on g.
class WarpedModel {
 public:
  WarpedModel(double alpha, GpModel g_model);

  double alpha() const { return alpha_; }
  const GpModel& g_model() const { return g_model_; }
  int dim() const { return g_model_.dim(); }

  // alpha + m_g(x)^2 / 2
  double implied_mean(const Point& x) const;

 private:
  double alpha_;
  GpModel g_model_;
};

// Warps `ell` and conditions a GP with the given hyperparameters on the result.
WarpedModel fit_warped(const Points& x, const Eigen::VectorXd& ell, const KernelParams& params,
                       double min_fraction = kDefaultMinFraction);

// alpha + w^T Gamma w / 2 with w = K^{-1} g.
double wsabi_integral_mean(const WarpedModel& model, const GaussianMeasure& prior);

// Monte Carlo estimate of int int m_g(x) C_g(x, x') m_g(x') pi(x) pi(x') over
// all pairs of `n_samples` seeded prior draws. Clamped at zero.
double wsabi_integral_variance(const WarpedModel& model, const GaussianMeasure& prior, int n_samples,
                               std::uint64_t seed);

struct AcquisitionPoint {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

// m_g(x)^2 C_g(x, x): pointwise variance of the linearised integrand, without
// constant factors.
AcquisitionPoint acquisition(const WarpedModel& model, const Point& x);
BatchEval acquisition(const WarpedModel& model, const Points& q, Exec exec = Exec::kParallel);

}  // namespace batchquad
