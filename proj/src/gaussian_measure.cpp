#include "batchquad/gaussian_measure.hpp"

#include <cmath>
#include <numbers>

namespace batchquad {

GaussianMeasure::GaussianMeasure(Point mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const Eigen::Index d = mean_.size();
  require(d >= 1, "GaussianMeasure: dimension must be at least 1");
  require(covariance_.rows() == d && covariance_.cols() == d,
          "GaussianMeasure: covariance shape does not match mean");
  require((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * covariance_.cwiseAbs().maxCoeff(),
          "GaussianMeasure: covariance must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  require(llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0,
          "GaussianMeasure: covariance must be positive definite");
  chol_ = llt.matrixL();
  log_norm_ = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
              chol_.diagonal().array().log().sum();
}

GaussianMeasure GaussianMeasure::isotropic(int dim, double variance) {
  require(variance > 0.0, "GaussianMeasure: variance must be positive");
  return GaussianMeasure(Point::Zero(dim), variance * Eigen::MatrixXd::Identity(dim, dim));
}

GaussianMeasure GaussianMeasure::diagonal(Point mean, const Eigen::VectorXd& variances) {
  require(variances.size() == mean.size(), "GaussianMeasure: variance count does not match mean");
  require((variances.array() > 0.0).all(), "GaussianMeasure: variances must be positive");
  return GaussianMeasure(std::move(mean), variances.asDiagonal().toDenseMatrix());
}

double GaussianMeasure::log_density(const Point& x) const {
  require(x.size() == mean_.size(), "GaussianMeasure: dimension mismatch");
  const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return log_norm_ - 0.5 * z.squaredNorm();
}

double GaussianMeasure::density(const Point& x) const { return std::exp(log_density(x)); }

Points GaussianMeasure::sample(std::mt19937_64& rng, int count) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = mean_.size();
  Points out(count, d);
  Eigen::VectorXd z(d);
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) z[k] = normal(rng);
    out.row(i) = (mean_ + chol_ * z).transpose();
  }
  return out;
}

}  // namespace batchquad
