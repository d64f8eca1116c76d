#include "batchquad/kernel.hpp"

#include <limits>
#include <string>

namespace batchquad {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void validate(const KernelParams& params) {
  if (!(params.output_scale > 0.0) || !(params.lengthscale > 0.0) ||
      !std::isfinite(params.output_scale) || !std::isfinite(params.lengthscale)) {
    throw ArgumentError("kernel parameters must be finite and positive (output_scale=" +
                        std::to_string(params.output_scale) +
                        ", lengthscale=" + std::to_string(params.lengthscale) + ")");
  }
}

double se_kernel(const Point& x, const Point& x2, const KernelParams& params) {
  if (x.size() != x2.size()) {
    throw ArgumentError("se_kernel: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                        std::to_string(x2.size()) + ")");
  }
  validate(params);
  const double r2 = (x - x2).squaredNorm();
  return params.variance() * std::exp(-0.5 * r2 / (params.lengthscale * params.lengthscale));
}

namespace kernels {
namespace {

inline double entry(const Points& a, Eigen::Index i, const Points& b, Eigen::Index j, double var,
                    double inv_two_l2) {
  return var * std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv_two_l2);
}

void check_dims(const Points& x, const Points& q) {
  if (x.rows() > 0 && q.rows() > 0 && x.cols() != q.cols()) {
    throw ArgumentError("cross_covariance: dimension mismatch");
  }
}

}  // namespace

namespace serial {

Eigen::MatrixXd gram(const Points& x, const KernelParams& params, double jitter) {
  const Eigen::Index n = x.rows();
  const double var = params.variance();
  const double c = 0.5 / (params.lengthscale * params.lengthscale);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = var + jitter;
    for (Eigen::Index j = 0; j < i; ++j) {
      k(i, j) = entry(x, i, x, j, var, c);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

Eigen::MatrixXd cross_covariance(const Points& x, const Points& q, const KernelParams& params) {
  check_dims(x, q);
  const double var = params.variance();
  const double c = 0.5 / (params.lengthscale * params.lengthscale);
  Eigen::MatrixXd k(x.rows(), q.rows());
  for (Eigen::Index j = 0; j < q.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) k(i, j) = entry(x, i, q, j, var, c);
  }
  return k;
}

}  // namespace serial

namespace omp {

Eigen::MatrixXd gram(const Points& x, const KernelParams& params, double jitter) {
  const Eigen::Index n = x.rows();
  const double var = params.variance();
  const double c = 0.5 / (params.lengthscale * params.lengthscale);
  Eigen::MatrixXd k(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = var + jitter;
    for (Eigen::Index j = 0; j < i; ++j) k(i, j) = entry(x, i, x, j, var, c);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) k(j, i) = k(i, j);
  }
  return k;
}

Eigen::MatrixXd cross_covariance(const Points& x, const Points& q, const KernelParams& params) {
  check_dims(x, q);
  const double var = params.variance();
  const double c = 0.5 / (params.lengthscale * params.lengthscale);
  Eigen::MatrixXd k(x.rows(), q.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < q.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) k(i, j) = entry(x, i, q, j, var, c);
  }
  return k;
}

}  // namespace omp
}  // namespace kernels
}  // namespace batchquad
