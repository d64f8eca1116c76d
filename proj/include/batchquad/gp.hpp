#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "batchquad/kernel.hpp"

namespace batchquad {

// Jitter added to the Gram diagonal, relative to the signal variance, before
// any escalation.
inline constexpr double kRelativeJitter = 1e-10;
inline constexpr int kMaxJitterEscalations = 6;

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

struct PosteriorBatch {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// Posterior moments with their spatial gradients, one row per query point.
struct PosteriorGradBatch {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd mean_grad;
  Eigen::MatrixXd variance_grad;
};

// Zero-mean GP with an SE kernel conditioned on noiseless observations.
// Immutable once fitted; refitting produces a new value.
class GpModel {
 public:
  // Unconditioned prior of the given dimension.
  GpModel(int dim, KernelParams params);

  int dim() const { return dim_; }
  Eigen::Index size() const { return inputs_.rows(); }
  bool empty() const { return inputs_.rows() == 0; }

  const Points& inputs() const { return inputs_; }
  const Eigen::VectorXd& targets() const { return targets_; }
  const KernelParams& params() const { return params_; }
  // Jitter actually used, after any escalation.
  double jitter() const { return jitter_; }
  // Lower Cholesky factor of k(X, X) + jitter I.
  const Eigen::MatrixXd& chol() const { return chol_; }
  // K^{-1} y.
  const Eigen::VectorXd& weights() const { return weights_; }

  // Solves (K + jitter I) a = b using the cached factor.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  // L^{-1} b.
  Eigen::MatrixXd half_solve(const Eigen::MatrixXd& b) const;

  Posterior posterior(const Point& x) const;
  // Mean only; skips the triangular solve needed for the variance.
  double posterior_mean(const Point& x) const;
  PosteriorBatch posterior(const Points& q, Exec exec = Exec::kParallel) const;
  // Full posterior covariance C(q_i, q_j).
  Eigen::MatrixXd posterior_covariance(const Points& q) const;
  PosteriorGradBatch posterior_with_gradients(const Points& q, Exec exec = Exec::kParallel) const;

  Eigen::VectorXd posterior_mean_gradient(const Point& x) const;

  // Same inputs and hyperparameters with one extra observation.
  GpModel with_observation(const Point& x, double y) const;

 private:
  friend GpModel fit_gp(const Points&, const Eigen::VectorXd&, const KernelParams&, double);

  int dim_ = 0;
  Points inputs_;
  Eigen::VectorXd targets_;
  KernelParams params_;
  double requested_jitter_ = 0.0;
  double jitter_ = 0.0;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd weights_;
};

// Factorises k(X, X) + jitter I. If the factorisation fails the jitter is
// escalated (from at least kRelativeJitter * s^2, x10 each time, at most
// kMaxJitterEscalations times) before a NumericalError is raised.
GpModel fit_gp(const Points& x, const Eigen::VectorXd& y, const KernelParams& params, double jitter);
GpModel fit_gp(const Points& x, const Eigen::VectorXd& y, const KernelParams& params);

double log_marginal_likelihood(const GpModel& model);

// Log evidence and its gradient with respect to (log lengthscale, log output scale).
std::pair<double, Eigen::Vector2d> log_marginal_likelihood_with_gradient(const GpModel& model);

struct HyperparamFit {
  KernelParams params;
  double log_marginal_likelihood = 0.0;
  // Set when no restart improved on its own starting value.
  bool warning = false;
};

// Bounds of the log-parameter search box.
inline constexpr double kLogParamLower = -5.0;
inline constexpr double kLogParamUpper = 5.0;

// Maximises the log marginal likelihood over (log lengthscale, log output
// scale) in [-5, 5]^2 with `restarts` uniform starts. When `warm_start` is
// given it replaces the first uniform start.
HyperparamFit optimise_hyperparams(const Points& x, const Eigen::VectorXd& y, int restarts,
                                   std::uint64_t seed,
                                   std::optional<KernelParams> warm_start = std::nullopt);

// One joint draw of f(points) from the GP prior.
Eigen::VectorXd sample_gp_prior(const KernelParams& params, const Points& points, std::uint64_t seed);

}  // namespace batchquad
