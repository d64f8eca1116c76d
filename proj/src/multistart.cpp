#include "batchquad/multistart.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace batchquad {

Points sample_starts(const GaussianMeasure& prior, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return prior.sample(rng, kStartsPerDimension * prior.dim());
}

StackedObjective::StackedObjective(BatchObjective f, int dim, int count)
    : f_(std::move(f)), dim_(dim), count_(count) {
  require(dim >= 1 && count >= 1, "StackedObjective: need dim >= 1 and count >= 1");
}

Points StackedObjective::unstack(const Eigen::VectorXd& z) const {
  require(z.size() == size(), "StackedObjective: size mismatch");
  Points out(count_, dim_);
  for (int i = 0; i < count_; ++i) out.row(i) = z.segment(static_cast<Eigen::Index>(i) * dim_, dim_).transpose();
  return out;
}

Eigen::VectorXd StackedObjective::stack(const Points& blocks) const {
  require(blocks.rows() == count_ && blocks.cols() == dim_, "StackedObjective: shape mismatch");
  Eigen::VectorXd z(size());
  for (int i = 0; i < count_; ++i) z.segment(static_cast<Eigen::Index>(i) * dim_, dim_) = blocks.row(i).transpose();
  return z;
}

BatchEval StackedObjective::evaluate_blocks(const Points& blocks) const {
  require(blocks.cols() == dim_, "StackedObjective: dimension mismatch");
  BatchEval e = f_(blocks);
  require(e.values.size() == blocks.rows() && e.gradients.rows() == blocks.rows() &&
              e.gradients.cols() == dim_,
          "StackedObjective: objective returned wrong shape");
  return e;
}

BatchEval StackedObjective::evaluate_blocks(const Eigen::VectorXd& z) const {
  return evaluate_blocks(unstack(z));
}

std::pair<double, Eigen::VectorXd> StackedObjective::operator()(const Eigen::VectorXd& z) const {
  const BatchEval e = evaluate_blocks(z);
  return {e.values.sum(), stack(e.gradients)};
}

StackedObjective concat_objective(BatchObjective f, const Points& starts) {
  require(starts.rows() >= 1, "concat_objective: need at least one start");
  return StackedObjective(std::move(f), static_cast<int>(starts.cols()), static_cast<int>(starts.rows()));
}

namespace {

bool finite_row(const BatchEval& e, Eigen::Index i) {
  return std::isfinite(e.values[i]) && e.gradients.row(i).allFinite();
}

// Rows of `src` selected by `idx`.
Points gather(const Points& src, const std::vector<Eigen::Index>& idx) {
  Points out(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = src.row(idx[k]);
  return out;
}

StackedResult ascend_fixed_step(const StackedObjective& obj, const Points& starts, const LocalOptions& opts) {
  const Eigen::Index count = starts.rows();
  Points x = starts;
  BatchEval cur = obj.evaluate_blocks(x);
  StackedResult res{x, cur.values, 0};
  std::vector<bool> active(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) active[i] = finite_row(cur, i);
  for (int it = 0; it < opts.max_iterations; ++it) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < count; ++i) {
      if (active[i] && cur.gradients.row(i).norm() < opts.gradient_tolerance) active[i] = false;
      if (active[i]) idx.push_back(i);
    }
    if (idx.empty()) break;
    res.iterations = it + 1;
    for (Eigen::Index i : idx) x.row(i) += opts.fixed_step * cur.gradients.row(i);
    const BatchEval e = obj.evaluate_blocks(gather(x, idx));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Eigen::Index i = idx[k];
      const auto r = static_cast<Eigen::Index>(k);
      if (!finite_row(e, r)) {
        active[i] = false;
        continue;
      }
      cur.values[i] = e.values[r];
      cur.gradients.row(i) = e.gradients.row(r);
      if (e.values[r] > res.values[i]) {
        res.values[i] = e.values[r];
        res.points.row(i) = x.row(i);
      }
    }
  }
  return res;
}

StackedResult ascend_quasi_newton(const StackedObjective& obj, const Points& starts, const LocalOptions& opts) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 40;
  const Eigen::Index count = starts.rows();
  const Eigen::Index d = starts.cols();
  Points x = starts;
  BatchEval cur = obj.evaluate_blocks(x);
  StackedResult res{x, cur.values, 0};
  std::vector<bool> active(static_cast<std::size_t>(count));
  std::vector<Eigen::MatrixXd> hinv(static_cast<std::size_t>(count));
  std::vector<bool> fresh(static_cast<std::size_t>(count), true);
  auto reset = [&](Eigen::Index i) {
    const double gn = cur.gradients.row(i).norm();
    hinv[i] = Eigen::MatrixXd::Identity(d, d) * (gn > 0.0 ? opts.initial_step / gn : 1.0);
    fresh[i] = true;
  };
  for (Eigen::Index i = 0; i < count; ++i) {
    active[i] = finite_row(cur, i);
    if (active[i]) reset(i);
  }

  bool retried = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < count; ++i) {
      if (active[i] && cur.gradients.row(i).norm() < opts.gradient_tolerance) active[i] = false;
      if (active[i]) idx.push_back(i);
    }
    if (idx.empty()) break;
    res.iterations = it + 1;

    Points dir(static_cast<Eigen::Index>(idx.size()), d);
    double slope = 0.0;
    double current_sum = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Eigen::Index i = idx[k];
      Eigen::VectorXd g = cur.gradients.row(i).transpose();
      Eigen::VectorXd p = hinv[i] * g;
      if (p.dot(g) <= 0.0) {
        reset(i);
        p = hinv[i] * g;
      }
      dir.row(static_cast<Eigen::Index>(k)) = p.transpose();
      slope += p.dot(g);
      current_sum += cur.values[i];
    }

    const Points base = gather(x, idx);
    double step = 1.0;
    bool accepted = false;
    BatchEval trial;
    Points trial_x;
    for (int ls = 0; ls < kMaxBacktracks; ++ls, step *= 0.5) {
      trial_x = base + step * dir;
      trial = obj.evaluate_blocks(trial_x);
      bool finite = true;
      for (Eigen::Index r = 0; r < trial_x.rows(); ++r) finite = finite && finite_row(trial, r);
      if (finite && trial.values.sum() >= current_sum + kArmijo * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (retried) break;
      retried = true;
      for (Eigen::Index i : idx) reset(i);
      continue;
    }
    retried = false;

    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Eigen::Index i = idx[k];
      const auto r = static_cast<Eigen::Index>(k);
      const Eigen::VectorXd s = (trial_x.row(r) - x.row(i)).transpose();
      // Curvature pair for the minimisation of -f.
      const Eigen::VectorXd y = (cur.gradients.row(i) - trial.gradients.row(r)).transpose();
      x.row(i) = trial_x.row(r);
      cur.values[i] = trial.values[r];
      cur.gradients.row(i) = trial.gradients.row(r);
      if (trial.values[r] > res.values[i]) {
        res.values[i] = trial.values[r];
        res.points.row(i) = x.row(i);
      }
      const double sy = s.dot(y);
      if (sy > 1e-300 && sy > 1e-12 * s.norm() * y.norm()) {
        if (fresh[i]) {
          hinv[i] = Eigen::MatrixXd::Identity(d, d) * (sy / y.squaredNorm());
          fresh[i] = false;
        }
        const double rho = 1.0 / sy;
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
        hinv[i] = (eye - rho * s * y.transpose()) * hinv[i] * (eye - rho * y * s.transpose()) +
                  rho * s * s.transpose();
      }
      if (s.norm() <= 1e-14 * (1.0 + x.row(i).norm())) active[i] = false;
    }
  }
  return res;
}

}  // namespace

StackedResult ascend_stacked(const StackedObjective& obj, const Points& starts, const LocalOptions& opts) {
  require(starts.rows() == obj.count() && starts.cols() == obj.dim(), "ascend_stacked: start shape mismatch");
  return opts.method == LocalMethod::kFixedStep ? ascend_fixed_step(obj, starts, opts)
                                                : ascend_quasi_newton(obj, starts, opts);
}

MaximiseResult maximise_from(const BatchObjective& f, Points starts, std::uint64_t seed,
                             const MaximiseOptions& opts) {
  require(starts.rows() >= 1 && starts.allFinite(), "maximise: starts must be finite and non-empty");
  if (opts.avoid.rows() > 0 && opts.avoid_radius > 0.0) {
    require(opts.avoid.cols() == starts.cols(), "maximise: avoid set has wrong dimension");
    std::mt19937_64 rng(derive_seed(seed, 0x6e75646765ULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < starts.rows(); ++i) {
      for (Eigen::Index c = 0; c < opts.avoid.rows(); ++c) {
        if ((starts.row(i) - opts.avoid.row(c)).norm() < opts.avoid_radius) {
          Eigen::VectorXd u(starts.cols());
          for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = normal(rng);
          starts.row(i) += (opts.nudge_distance / u.norm()) * u.transpose();
          break;
        }
      }
    }
  }
  const StackedObjective obj = concat_objective(f, starts);
  const StackedResult r = ascend_stacked(obj, starts, opts.local);
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < r.values.size(); ++i) {
    if (!std::isfinite(r.values[i])) continue;
    if (best < 0 || r.values[i] > r.values[best]) best = i;
  }
  if (best < 0) throw NumericalError("maximise: objective non-finite at every start");
  return {r.points.row(best).transpose(), r.values[best]};
}

MaximiseResult maximise(const BatchObjective& f, const GaussianMeasure& prior, std::uint64_t seed,
                        const MaximiseOptions& opts) {
  return maximise_from(f, sample_starts(prior, seed), seed, opts);
}

}  // namespace batchquad
