#pragma once

#include <cmath>
#include <vector>

#include "batchquad/common.hpp"

namespace batchquad {

// Isotropic squared-exponential kernel: k(x, x') = s^2 exp(-|x - x'|^2 / (2 l^2)).
struct KernelParams {
  double output_scale = 1.0;
  double lengthscale = 1.0;

  double variance() const { return output_scale * output_scale; }
};

void validate(const KernelParams& params);

double se_kernel(const Point& x, const Point& x2, const KernelParams& params);

// Selects between the serial reference kernels and the OpenMP ones. Both
// produce bit-identical output; the serial path exists for testing and
// benchmarking.
enum class Exec { kSerial, kParallel };

namespace kernels {

namespace serial {
Eigen::MatrixXd gram(const Points& x, const KernelParams& params, double jitter);
Eigen::MatrixXd cross_covariance(const Points& x, const Points& q, const KernelParams& params);
}  // namespace serial

namespace omp {
Eigen::MatrixXd gram(const Points& x, const KernelParams& params, double jitter);
Eigen::MatrixXd cross_covariance(const Points& x, const Points& q, const KernelParams& params);
}  // namespace omp

inline Eigen::MatrixXd gram(const Points& x, const KernelParams& params, double jitter,
                            Exec exec = Exec::kParallel) {
  return exec == Exec::kSerial ? serial::gram(x, params, jitter) : omp::gram(x, params, jitter);
}

// k(X, Q): one row per training input, one column per query.
inline Eigen::MatrixXd cross_covariance(const Points& x, const Points& q, const KernelParams& params,
                                        Exec exec = Exec::kParallel) {
  return exec == Exec::kSerial ? serial::cross_covariance(x, q, params)
                               : omp::cross_covariance(x, q, params);
}

// Evaluates fn at every row of q.
template <typename Fn>
Eigen::VectorXd map_rows(Fn&& fn, const Points& q, Exec exec = Exec::kParallel) {
  const Eigen::Index m = q.rows();
  Eigen::VectorXd out(m);
  if (exec == Exec::kSerial) {
    for (Eigen::Index i = 0; i < m; ++i) out[i] = fn(Point(q.row(i).transpose()));
  } else {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < m; ++i) out[i] = fn(Point(q.row(i).transpose()));
  }
  return out;
}

// Tensor trapezoid rule over [lo, hi]^2 with `nodes` points per axis.
// Row sums are formed independently and then combined in row order, so the
// result does not depend on thread count.
template <typename Fn>
double trapezoid_2d(Fn&& fn, double lo, double hi, int nodes, Exec exec = Exec::kParallel) {
  if (nodes < 2) throw ArgumentError("trapezoid_2d: need at least 2 nodes per axis");
  const double h = (hi - lo) / (nodes - 1);
  std::vector<double> rows(static_cast<std::size_t>(nodes));
  auto row_sum = [&](int i) {
    Point x(2);
    x[0] = lo + i * h;
    double s = 0.0;
    for (int j = 0; j < nodes; ++j) {
      x[1] = lo + j * h;
      const double w = (j == 0 || j == nodes - 1) ? 0.5 : 1.0;
      s += w * fn(x);
    }
    const double w = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
    return w * s;
  };
  if (exec == Exec::kSerial) {
    for (int i = 0; i < nodes; ++i) rows[i] = row_sum(i);
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nodes; ++i) rows[i] = row_sum(i);
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total * h * h;
}

// Same rule applied to exp(log_fn), accumulated with log-sum-exp. Returns the
// log of the integral.
template <typename Fn>
double trapezoid_2d_log(Fn&& log_fn, double lo, double hi, int nodes, Exec exec = Exec::kParallel) {
  if (nodes < 2) throw ArgumentError("trapezoid_2d_log: need at least 2 nodes per axis");
  const double h = (hi - lo) / (nodes - 1);
  const auto n = static_cast<std::size_t>(nodes);
  std::vector<double> logs(n * n);
  auto fill_row = [&](int i) {
    Point x(2);
    x[0] = lo + i * h;
    const double wi = (i == 0 || i == nodes - 1) ? std::log(0.5) : 0.0;
    for (int j = 0; j < nodes; ++j) {
      x[1] = lo + j * h;
      const double wj = (j == 0 || j == nodes - 1) ? std::log(0.5) : 0.0;
      logs[static_cast<std::size_t>(i) * n + j] = wi + wj + log_fn(x);
    }
  };
  if (exec == Exec::kSerial) {
    for (int i = 0; i < nodes; ++i) fill_row(i);
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nodes; ++i) fill_row(i);
  }
  double peak = -INFINITY;
  for (double v : logs) peak = std::max(peak, v);
  if (!std::isfinite(peak)) throw NumericalError("trapezoid_2d_log: integrand is zero or non-finite");
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - peak);
  return peak + std::log(acc) + 2.0 * std::log(h);
}

}  // namespace kernels
}  // namespace batchquad
