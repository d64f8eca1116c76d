#include "batchquad/warped_bq.hpp"

#include <cmath>
#include <random>

namespace batchquad {

WarpedTargets warp_targets(const Eigen::VectorXd& ell, double min_fraction) {
  require(ell.size() >= 1, "warp_targets: need at least one value");
  require(ell.allFinite() && (ell.array() >= 0.0).all(), "warp_targets: values must be finite and >= 0");
  require(min_fraction >= 0.0 && min_fraction <= 1.0, "warp_targets: min_fraction must lie in [0, 1]");
  WarpedTargets out;
  out.alpha = min_fraction * ell.minCoeff();
  out.g = (2.0 * (ell.array() - out.alpha)).max(0.0).sqrt().matrix();
  return out;
}

KernelIntegrals::KernelIntegrals(const KernelParams& params, const GaussianMeasure& prior)
    : params_(params), prior_mean_(prior.mean()) {
  validate(params);
  const int d = prior.dim();
  const double l2 = params.lengthscale * params.lengthscale;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd& s = prior.covariance();
  single_.compute(l2 * eye + s);
  half_.compute(0.5 * l2 * eye + s);
  // |I + S/l^2| = |l^2 I + S| / l^{2d}; log-determinants from the factors.
  auto logdet = [](const Eigen::LLT<Eigen::MatrixXd>& f) {
    return 2.0 * f.matrixLLT().diagonal().array().log().sum();
  };
  const double ld_single = logdet(single_) - d * std::log(l2);
  const double ld_half = logdet(half_) - d * std::log(0.5 * l2);
  single_scale_ = params.variance() * std::exp(-0.5 * ld_single);
  product_scale_ = params.variance() * params.variance() * std::exp(-0.5 * ld_half);
  Eigen::LLT<Eigen::MatrixXd> twice(eye + 2.0 * s / l2);
  double_mean_ = params.variance() * std::exp(-0.5 * logdet(twice));
}

double KernelIntegrals::mean(const Point& x) const {
  require(x.size() == prior_mean_.size(), "kernel_prior_mean: dimension mismatch");
  const Eigen::VectorXd r = x - prior_mean_;
  return single_scale_ * std::exp(-0.5 * r.dot(single_.solve(r)));
}

Eigen::VectorXd KernelIntegrals::mean(const Points& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = mean(Point(x.row(i).transpose()));
  return out;
}

double KernelIntegrals::product(const Point& a, const Point& b) const {
  require(a.size() == prior_mean_.size() && b.size() == prior_mean_.size(),
          "kernel_product_integral: dimension mismatch");
  // k(a, s) k(s, b) = s^4 exp(-|a-b|^2 / (4 l^2)) exp(-|s - c|^2 / l^2), c = (a + b) / 2
  const double l2 = params_.lengthscale * params_.lengthscale;
  const Eigen::VectorXd c = 0.5 * (a + b) - prior_mean_;
  return product_scale_ * std::exp(-0.25 * (a - b).squaredNorm() / l2 - 0.5 * c.dot(half_.solve(c)));
}

Eigen::MatrixXd KernelIntegrals::product(const Points& x) const {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point xi = x.row(i).transpose();
    for (Eigen::Index j = 0; j <= i; ++j) {
      out(i, j) = product(xi, Point(x.row(j).transpose()));
      out(j, i) = out(i, j);
    }
  }
  return out;
}

double kernel_prior_mean(const KernelParams& params, const GaussianMeasure& prior, const Point& x) {
  return KernelIntegrals(params, prior).mean(x);
}

double kernel_prior_double_mean(const KernelParams& params, const GaussianMeasure& prior) {
  return KernelIntegrals(params, prior).double_mean();
}

double kernel_product_integral(const KernelParams& params, const GaussianMeasure& prior, const Point& a,
                               const Point& b) {
  return KernelIntegrals(params, prior).product(a, b);
}

IntegralEstimate vanilla_bq_moments(const GpModel& model, const GaussianMeasure& prior) {
  require(model.dim() == prior.dim(), "vanilla_bq_moments: dimension mismatch");
  const KernelIntegrals ki(model.params(), prior);
  if (model.empty()) return {0.0, ki.double_mean()};
  const Eigen::VectorXd z = ki.mean(model.inputs());
  const Eigen::VectorXd v = model.half_solve(z);
  return {z.dot(model.weights()), std::max(0.0, ki.double_mean() - v.squaredNorm())};
}

WarpedModel::WarpedModel(double alpha, GpModel g_model) : alpha_(alpha), g_model_(std::move(g_model)) {
  require(std::isfinite(alpha), "WarpedModel: alpha must be finite");
}

double WarpedModel::implied_mean(const Point& x) const {
  const double m = g_model_.posterior_mean(x);
  return alpha_ + 0.5 * m * m;
}

WarpedModel fit_warped(const Points& x, const Eigen::VectorXd& ell, const KernelParams& params,
                       double min_fraction) {
  const WarpedTargets w = warp_targets(ell, min_fraction);
  return WarpedModel(w.alpha, fit_gp(x, w.g, params));
}

double wsabi_integral_mean(const WarpedModel& model, const GaussianMeasure& prior) {
  const GpModel& g = model.g_model();
  require(g.dim() == prior.dim(), "wsabi_integral_mean: dimension mismatch");
  if (g.empty()) return model.alpha();
  const KernelIntegrals ki(g.params(), prior);
  const Eigen::MatrixXd gamma = ki.product(g.inputs());
  const Eigen::VectorXd& w = g.weights();
  return model.alpha() + 0.5 * std::max(0.0, w.dot(gamma * w));
}

double wsabi_integral_variance(const WarpedModel& model, const GaussianMeasure& prior, int n_samples,
                               std::uint64_t seed) {
  const GpModel& g = model.g_model();
  require(g.dim() == prior.dim(), "wsabi_integral_variance: dimension mismatch");
  require(n_samples >= 1, "wsabi_integral_variance: need at least one sample");
  if (g.empty()) return 0.0;
  std::mt19937_64 rng(seed);
  const Points s = prior.sample(rng, n_samples);
  const Eigen::VectorXd m = g.posterior(s).mean;
  const Eigen::MatrixXd c = g.posterior_covariance(s);
  const double n = static_cast<double>(n_samples);
  return std::max(0.0, m.dot(c * m) / (n * n));
}

AcquisitionPoint acquisition(const WarpedModel& model, const Point& x) {
  require(x.size() == model.dim(), "acquisition: dimension mismatch");
  const BatchEval b = acquisition(model, Points(x.transpose()), Exec::kSerial);
  return {b.values[0], b.gradients.row(0).transpose()};
}

BatchEval acquisition(const WarpedModel& model, const Points& q, Exec exec) {
  const PosteriorGradBatch p = model.g_model().posterior_with_gradients(q, exec);
  BatchEval out;
  const Eigen::ArrayXd m = p.mean.array();
  const Eigen::ArrayXd c = p.variance.array();
  out.values = (m * m * c).matrix();
  // d(m^2 c) = 2 m c dm + m^2 dc
  out.gradients = (2.0 * m * c).matrix().asDiagonal() * p.mean_grad;
  out.gradients += (m * m).matrix().asDiagonal() * p.variance_grad;
  return out;
}

}  // namespace batchquad
