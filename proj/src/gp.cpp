#include "batchquad/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace batchquad {
namespace {

struct Factor {
  Eigen::MatrixXd chol;
  double jitter = 0.0;
};

bool try_cholesky(const Eigen::MatrixXd& k, Eigen::MatrixXd& chol) {
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return false;
  chol = llt.matrixL();
  const auto diag = chol.diagonal();
  return diag.allFinite() && (diag.array() > 0.0).all();
}

// Factorises `k_nojitter + jitter I`, escalating the jitter on failure.
Factor factorise(const Eigen::MatrixXd& k_nojitter, double variance, double jitter) {
  Factor f;
  const Eigen::Index n = k_nojitter.rows();
  if (n == 0) {
    f.jitter = jitter;
    return f;
  }
  Eigen::MatrixXd k = k_nojitter;
  k.diagonal().array() += jitter;
  if (try_cholesky(k, f.chol)) {
    f.jitter = jitter;
    return f;
  }
  double j = std::max(jitter * 10.0, kRelativeJitter * variance);
  for (int e = 0; e < kMaxJitterEscalations; ++e, j *= 10.0) {
    k = k_nojitter;
    k.diagonal().array() += j;
    if (try_cholesky(k, f.chol)) {
      f.jitter = j;
      return f;
    }
  }
  std::ostringstream msg;
  msg << "Gram matrix not positive definite after jitter escalation (final jitter " << j / 10.0
      << ", n=" << n << ")";
  throw NumericalError(msg.str());
}

}  // namespace

GpModel::GpModel(int dim, KernelParams params) : dim_(dim), inputs_(0, dim), params_(params) {
  validate(params_);
  require(dim >= 1, "GpModel: dimension must be at least 1");
}

GpModel fit_gp(const Points& x, const Eigen::VectorXd& y, const KernelParams& params, double jitter) {
  validate(params);
  require(x.rows() == y.size(), "fit_gp: number of inputs and targets differ");
  require(jitter >= 0.0, "fit_gp: jitter must be non-negative");
  require(x.cols() >= 1, "fit_gp: inputs must have at least one column");
  require(x.allFinite() && y.allFinite(), "fit_gp: non-finite training data");
  GpModel model(static_cast<int>(x.cols()), params);
  model.inputs_ = x;
  model.targets_ = y;
  model.requested_jitter_ = jitter;
  Factor f = factorise(kernels::gram(x, params, 0.0), params.variance(), jitter);
  model.jitter_ = f.jitter;
  model.chol_ = std::move(f.chol);
  if (x.rows() > 0) model.weights_ = model.solve(y);
  return model;
}

GpModel fit_gp(const Points& x, const Eigen::VectorXd& y, const KernelParams& params) {
  return fit_gp(x, y, params, kRelativeJitter * params.variance());
}

Eigen::MatrixXd GpModel::half_solve(const Eigen::MatrixXd& b) const {
  return chol_.triangularView<Eigen::Lower>().solve(b);
}

Eigen::MatrixXd GpModel::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd z = half_solve(b);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Posterior GpModel::posterior(const Point& x) const {
  require(x.size() == dim_, "posterior: dimension mismatch");
  if (empty()) return {0.0, params_.variance()};
  const Eigen::VectorXd kx = kernels::cross_covariance(inputs_, x.transpose(), params_, Exec::kSerial);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(kx);
  return {kx.dot(weights_), std::max(0.0, params_.variance() - v.squaredNorm())};
}

double GpModel::posterior_mean(const Point& x) const {
  require(x.size() == dim_, "posterior_mean: dimension mismatch");
  if (empty()) return 0.0;
  const double c = 0.5 / (params_.lengthscale * params_.lengthscale);
  double m = 0.0;
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
    m += weights_[i] * std::exp(-(inputs_.row(i) - x.transpose()).squaredNorm() * c);
  }
  return params_.variance() * m;
}

PosteriorBatch GpModel::posterior(const Points& q, Exec exec) const {
  require(q.cols() == dim_ || q.rows() == 0, "posterior: dimension mismatch");
  const Eigen::Index m = q.rows();
  PosteriorBatch out{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Constant(m, params_.variance())};
  if (empty()) return out;
  auto one = [&](Eigen::Index j) {
    const Posterior p = posterior(Point(q.row(j).transpose()));
    out.mean[j] = p.mean;
    out.variance[j] = p.variance;
  };
  if (exec == Exec::kSerial) {
    for (Eigen::Index j = 0; j < m; ++j) one(j);
  } else {
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < m; ++j) one(j);
  }
  return out;
}

Eigen::MatrixXd GpModel::posterior_covariance(const Points& q) const {
  require(q.cols() == dim_, "posterior_covariance: dimension mismatch");
  Eigen::MatrixXd c = kernels::gram(q, params_, 0.0);
  if (empty()) return c;
  const Eigen::MatrixXd v = half_solve(kernels::cross_covariance(inputs_, q, params_));
  c.noalias() -= v.transpose() * v;
  return c;
}

PosteriorGradBatch GpModel::posterior_with_gradients(const Points& q, Exec exec) const {
  require(q.cols() == dim_ || q.rows() == 0, "posterior_with_gradients: dimension mismatch");
  const Eigen::Index m = q.rows();
  PosteriorGradBatch out{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Constant(m, params_.variance()),
                         Eigen::MatrixXd::Zero(m, dim_), Eigen::MatrixXd::Zero(m, dim_)};
  if (empty()) return out;
  const double inv_l2 = 1.0 / (params_.lengthscale * params_.lengthscale);
  const double var = params_.variance();
  auto one = [&](Eigen::Index j) {
    const Point x = q.row(j).transpose();
    const Eigen::VectorXd kx =
        kernels::cross_covariance(inputs_, x.transpose(), params_, Exec::kSerial);
    const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(kx);
    const Eigen::VectorXd a = chol_.transpose().triangularView<Eigen::Upper>().solve(v);
    const double mean = kx.dot(weights_);
    out.mean[j] = mean;
    out.variance[j] = std::max(0.0, var - v.squaredNorm());
    // d k(x_i, x) / dx = -(x - x_i) k(x_i, x) / l^2
    const Eigen::VectorXd wk = weights_.cwiseProduct(kx);
    const Eigen::VectorXd ak = a.cwiseProduct(kx);
    out.mean_grad.row(j) = (-inv_l2 * (mean * x - inputs_.transpose() * wk)).transpose();
    out.variance_grad.row(j) = (2.0 * inv_l2 * (ak.sum() * x - inputs_.transpose() * ak)).transpose();
  };
  if (exec == Exec::kSerial) {
    for (Eigen::Index j = 0; j < m; ++j) one(j);
  } else {
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < m; ++j) one(j);
  }
  return out;
}

Eigen::VectorXd GpModel::posterior_mean_gradient(const Point& x) const {
  require(x.size() == dim_, "posterior_mean_gradient: dimension mismatch");
  if (empty()) return Eigen::VectorXd::Zero(dim_);
  return posterior_with_gradients(x.transpose(), Exec::kSerial).mean_grad.row(0).transpose();
}

GpModel GpModel::with_observation(const Point& x, double y) const {
  require(x.size() == dim_, "with_observation: dimension mismatch");
  Points xs(inputs_.rows() + 1, dim_);
  xs.topRows(inputs_.rows()) = inputs_;
  xs.row(inputs_.rows()) = x.transpose();
  Eigen::VectorXd ys(targets_.size() + 1);
  ys.head(targets_.size()) = targets_;
  ys[targets_.size()] = y;
  return fit_gp(xs, ys, params_, requested_jitter_);
}

double log_marginal_likelihood(const GpModel& model) {
  require(!model.empty(), "log_marginal_likelihood: model has no observations");
  const auto n = static_cast<double>(model.size());
  return -0.5 * model.targets().dot(model.weights()) - model.chol().diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

std::pair<double, Eigen::Vector2d> log_marginal_likelihood_with_gradient(const GpModel& model) {
  const double lml = log_marginal_likelihood(model);
  const Eigen::Index n = model.size();
  const Eigen::VectorXd& w = model.weights();
  const Eigen::MatrixXd kinv = model.solve(Eigen::MatrixXd::Identity(n, n));
  const Points& x = model.inputs();
  const double l2 = model.params().lengthscale * model.params().lengthscale;
  const double var = model.params().variance();
  double g_len = 0.0;
  double g_scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double wij = w[i] * w[j] - kinv(i, j);
      const double r2 = (x.row(i) - x.row(j)).squaredNorm();
      const double kij = var * std::exp(-0.5 * r2 / l2);
      g_len += wij * kij * r2 / l2;
      g_scale += wij * 2.0 * kij;
    }
  }
  return {lml, Eigen::Vector2d(0.5 * g_len, 0.5 * g_scale)};
}

namespace {

KernelParams from_log(const Eigen::Vector2d& theta) {
  return {std::exp(theta[1]), std::exp(theta[0])};
}

struct Eval {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
};

// Line-search trials need only the value; the fitted model is kept so the
// O(n^3) gradient is paid for accepted points alone.
struct Trial {
  double value = -std::numeric_limits<double>::infinity();
  std::optional<GpModel> model;
};

Trial fit_at(const Points& x, const Eigen::VectorXd& y, const Eigen::Vector2d& theta) {
  Trial t;
  try {
    GpModel m = fit_gp(x, y, from_log(theta));
    const double v = log_marginal_likelihood(m);
    if (std::isfinite(v)) {
      t.value = v;
      t.model.emplace(std::move(m));
    }
  } catch (const NumericalError&) {
  }
  return t;
}

// A finite value with a non-finite gradient counts as a failed evaluation.
Eval with_gradient(const Trial& t) {
  Eval e;
  if (!t.model) return e;
  const Eigen::Vector2d g = log_marginal_likelihood_with_gradient(*t.model).second;
  if (g.allFinite()) {
    e.value = t.value;
    e.grad = g;
  }
  return e;
}

Eval evaluate(const Points& x, const Eigen::VectorXd& y, const Eigen::Vector2d& theta) {
  return with_gradient(fit_at(x, y, theta));
}

Eigen::Vector2d clamp_box(Eigen::Vector2d t) {
  return t.cwiseMax(kLogParamLower).cwiseMin(kLogParamUpper);
}

// Gradient of the box-projected problem: components pushing out of the box are zeroed.
Eigen::Vector2d projected(const Eigen::Vector2d& t, Eigen::Vector2d g) {
  for (int k = 0; k < 2; ++k) {
    if ((t[k] <= kLogParamLower && g[k] < 0.0) || (t[k] >= kLogParamUpper && g[k] > 0.0)) g[k] = 0.0;
  }
  return g;
}

// Projected BFGS ascent in the log-parameter box.
std::pair<Eigen::Vector2d, Eval> ascend(const Points& x, const Eigen::VectorXd& y,
                                        Eigen::Vector2d theta, Eval cur) {
  constexpr int kMaxIter = 100;
  Eigen::Matrix2d h = Eigen::Matrix2d::Identity();
  for (int it = 0; it < kMaxIter; ++it) {
    const Eigen::Vector2d pg = projected(theta, cur.grad);
    if (pg.norm() < 1e-6) break;
    Eigen::Vector2d dir = h * pg;
    if (dir.dot(pg) <= 0.0) {
      h.setIdentity();
      dir = pg;
    }
    double step = 1.0;
    bool accepted = false;
    Eigen::Vector2d next;
    Eval nxt;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      next = clamp_box(theta + step * dir);
      const Trial t = fit_at(x, y, next);
      if (!(t.value >= cur.value + 1e-4 * cur.grad.dot(next - theta) && t.value > -INFINITY)) continue;
      nxt = with_gradient(t);
      if (nxt.value > -INFINITY) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (h.isIdentity()) break;
      h.setIdentity();
      continue;
    }
    const Eigen::Vector2d s = next - theta;
    const Eigen::Vector2d yk = cur.grad - nxt.grad;  // gradient change of -LML
    const double sy = s.dot(yk);
    const double improvement = nxt.value - cur.value;
    theta = next;
    cur = nxt;
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix2d i2 = Eigen::Matrix2d::Identity();
      h = (i2 - rho * s * yk.transpose()) * h * (i2 - rho * yk * s.transpose()) + rho * s * s.transpose();
    }
    if (improvement < 1e-10 * (1.0 + std::abs(cur.value))) break;
  }
  return {theta, cur};
}

}  // namespace

HyperparamFit optimise_hyperparams(const Points& x, const Eigen::VectorXd& y, int restarts,
                                   std::uint64_t seed, std::optional<KernelParams> warm_start) {
  require(x.rows() >= 2, "optimise_hyperparams: need at least two observations");
  require(x.rows() == y.size(), "optimise_hyperparams: number of inputs and targets differ");
  require(restarts >= 1, "optimise_hyperparams: need at least one restart");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(kLogParamLower, kLogParamUpper);
  std::vector<Eigen::Vector2d> starts(static_cast<std::size_t>(restarts));
  for (auto& s : starts) {
    s[0] = unif(rng);
    s[1] = unif(rng);
  }
  if (warm_start) {
    validate(*warm_start);
    starts[0] = clamp_box({std::log(warm_start->lengthscale), std::log(warm_start->output_scale)});
  }

  HyperparamFit best;
  best.log_marginal_likelihood = -std::numeric_limits<double>::infinity();
  bool any_improved = false;
  Eigen::Vector2d best_theta = starts[0];
  for (const auto& s : starts) {
    const Eval e0 = evaluate(x, y, s);
    if (!(e0.value > -INFINITY)) continue;
    auto [theta, e] = ascend(x, y, s, e0);
    if (e.value > e0.value) any_improved = true;
    if (e.value > best.log_marginal_likelihood) {
      best.log_marginal_likelihood = e.value;
      best_theta = theta;
    }
  }
  if (!(best.log_marginal_likelihood > -INFINITY)) {
    throw NumericalError("optimise_hyperparams: log marginal likelihood non-finite at every restart");
  }
  best.params = from_log(best_theta);
  best.warning = !any_improved;
  return best;
}

Eigen::VectorXd sample_gp_prior(const KernelParams& params, const Points& points, std::uint64_t seed) {
  validate(params);
  const Eigen::Index n = points.rows();
  if (n == 0) return Eigen::VectorXd();
  const Factor f = factorise(kernels::gram(points, params, 0.0), params.variance(),
                             kRelativeJitter * params.variance());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return f.chol.triangularView<Eigen::Lower>() * z;
}

}  // namespace batchquad
