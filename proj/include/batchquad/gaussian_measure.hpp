#pragma once

#include <random>

#include "batchquad/common.hpp"

namespace batchquad {

// Gaussian integration measure N(mean, covariance).
class GaussianMeasure {
 public:
  GaussianMeasure(Point mean, Eigen::MatrixXd covariance);

  static GaussianMeasure isotropic(int dim, double variance);
  static GaussianMeasure diagonal(Point mean, const Eigen::VectorXd& variances);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Point& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }

  double log_density(const Point& x) const;
  double density(const Point& x) const;

  // `count` independent draws, one per row.
  Points sample(std::mt19937_64& rng, int count) const;

 private:
  Point mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;
  double log_norm_ = 0.0;
};

}  // namespace batchquad
