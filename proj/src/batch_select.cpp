#include "batchquad/batch_select.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace batchquad {

SoftMin soft_min(const Eigen::VectorXd& components, int p, double floor) {
  require(components.size() >= 1, "soft_min: need at least one component");
  require(p < 0, "soft_min: exponent must be negative");
  const Eigen::ArrayXd v = components.array().max(floor);
  const double lo = v.minCoeff();
  const Eigen::ArrayXd ratio = v / lo;
  const double sum = ratio.pow(static_cast<double>(p)).sum();
  const double scale = std::pow(sum, 1.0 / p);
  SoftMin out;
  out.value = lo * scale;
  // d/dv_i (sum v^p)^(1/p) = (v_i / value)^(p - 1)
  out.weights = (ratio / scale).pow(static_cast<double>(p - 1)).matrix();
  for (Eigen::Index i = 0; i < components.size(); ++i) {
    if (!(components[i] > floor)) out.weights[i] = 0.0;
  }
  return out;
}

BatchEval PenalisedAcquisition::operator()(const Points& q) const {
  BatchEval b = base(q);
  if (cones.empty()) return b;
  const Eigen::Index m = q.rows();
  const Eigen::Index k = static_cast<Eigen::Index>(cones.size());
  BatchEval out{Eigen::VectorXd(m), Eigen::MatrixXd(m, q.cols())};
  Eigen::VectorXd comps(k + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Point x = q.row(i).transpose();
    comps[0] = b.values[i];
    for (Eigen::Index c = 0; c < k; ++c) comps[c + 1] = cones[c].value(x);
    const SoftMin s = soft_min(comps, p, floor);
    out.values[i] = s.value;
    Eigen::VectorXd grad = s.weights[0] * b.gradients.row(i).transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      const Eigen::VectorXd r = x - cones[c].center;
      const double dist = r.norm();
      if (dist > 0.0 && s.weights[c + 1] != 0.0) grad += s.weights[c + 1] * cones[c].slope() / dist * r;
    }
    out.gradients.row(i) = grad.transpose();
  }
  return out;
}

std::pair<double, Eigen::VectorXd> penalised_value(const PenalisedAcquisition& pa, const Point& x) {
  const BatchEval e = pa(x.transpose());
  return {e.values[0], e.gradients.row(0).transpose()};
}

double estimate_local_lipschitz(const BatchObjective& acq, const Point& x0, double lengthscale) {
  constexpr int kIterations = 30;
  require(lengthscale > 0.0, "estimate_local_lipschitz: lengthscale must be positive");
  const Eigen::Index d = x0.size();
  const double fd_step = 1e-4 * lengthscale;
  const double move = 0.1 * lengthscale;

  // Row 0 is x; rows 1 + 2k and 2 + 2k are x +/- fd_step e_k.
  auto probe = [&](const Point& x) {
    Points q(1 + 2 * d, d);
    for (Eigen::Index r = 0; r < q.rows(); ++r) q.row(r) = x.transpose();
    for (Eigen::Index k = 0; k < d; ++k) {
      q(1 + 2 * k, k) += fd_step;
      q(2 + 2 * k, k) -= fd_step;
    }
    return acq(q);
  };

  auto jacobian = [&](const BatchEval& e) {
    Eigen::MatrixXd jac(d, d);  // column k: d grad / d x_k
    for (Eigen::Index k = 0; k < d; ++k) {
      jac.col(k) = (e.gradients.row(1 + 2 * k) - e.gradients.row(2 + 2 * k)).transpose() / (2.0 * fd_step);
    }
    return jac;
  };
  // Normalised ascent on |grad acq| from x0, first moving along `first`
  // (or along the ascent direction when `first` is empty).
  auto ascend = [&](BatchEval e, const Eigen::VectorXd& first, double best) {
    Point x = x0;
    for (int it = 0; it < kIterations; ++it) {
      if (!e.gradients.allFinite()) break;
      Eigen::VectorXd ascent;
      if (it == 0 && first.size() > 0) {
        ascent = first;
      } else {
        const Eigen::VectorXd g = e.gradients.row(0).transpose();
        const double gn = g.norm();
        if (!(gn > 0.0)) break;
        ascent = jacobian(e).transpose() * g / gn;
      }
      const double an = ascent.norm();
      if (!(an > 0.0) || !std::isfinite(an)) break;
      Point next = x + (move / an) * ascent;
      const double r = (next - x0).norm();
      if (r > lengthscale) next = x0 + (lengthscale / r) * (next - x0);
      if ((next - x).norm() < 1e-12 * lengthscale) break;
      x = next;
      e = probe(x);
      const double h = e.gradients.row(0).norm();
      if (!std::isfinite(h)) break;
      best = std::max(best, h);
    }
    return best;
  };

  const BatchEval e0 = probe(x0);
  const double h0 = e0.gradients.row(0).norm();
  if (!std::isfinite(h0)) return 0.0;
  if (!e0.gradients.allFinite()) return h0;
  const Eigen::MatrixXd jac = jacobian(e0);
  // x0 counts as stationary when its gradient is below what a 1e-6
  // lengthscale displacement would produce. Selected points are acquisition
  // maxima, so this is the usual case; the ascent direction is then only
  // defined up to sign and both are tried.
  if (h0 > 1e-6 * lengthscale * jac.norm()) return ascend(e0, Eigen::VectorXd(), h0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullV);
  if (!(svd.singularValues()[0] > 0.0)) return h0;
  const Eigen::VectorXd v = svd.matrixV().col(0);
  return std::max(ascend(e0, v, h0), ascend(e0, -v, h0));
}

PenalisedAcquisition add_penaliser(const PenalisedAcquisition& pa, const Point& x0,
                                   const BatchObjective& acq_for_lipschitz, double lengthscale,
                                   double slope_fraction) {
  require(x0.allFinite(), "add_penaliser: center must be finite");
  require(slope_fraction > 0.0 && slope_fraction <= 1.0, "add_penaliser: slope fraction must lie in (0, 1]");
  LipschitzCone cone{x0, estimate_local_lipschitz(acq_for_lipschitz, x0, lengthscale), slope_fraction};
  const BatchEval at_center = acq_for_lipschitz(x0.transpose());
  const double scale = std::max(std::isfinite(at_center.values[0]) ? at_center.values[0] : 0.0, pa.floor);
  const double min_slope = 1e-6 * scale;
  if (!(cone.slope() >= min_slope)) cone.lipschitz = min_slope / slope_fraction;
  PenalisedAcquisition out = pa;
  out.cones.push_back(std::move(cone));
  return out;
}

std::string to_string(BatchMethod m) {
  return m == BatchMethod::kKrigingBeliever ? "kb" : "lp";
}

void validate(const BatchConfig& cfg) {
  require(cfg.batch_size >= 1, "BatchConfig: batch_size must be at least 1");
  require(cfg.initial_design >= 1, "BatchConfig: initial design must have at least one point");
  require(cfg.budget >= cfg.initial_design, "BatchConfig: budget smaller than the initial design");
  require(cfg.min_fraction >= 0.0 && cfg.min_fraction <= 1.0, "BatchConfig: min_fraction must lie in [0, 1]");
  require(cfg.slope_fraction > 0.0 && cfg.slope_fraction <= 1.0,
          "BatchConfig: slope_fraction must lie in (0, 1]");
  require(cfg.p < 0 && cfg.p % 2 == 0, "BatchConfig: p must be a negative even integer");
  require(cfg.hyper_restarts >= 1, "BatchConfig: need at least one hyperparameter restart");
  require(cfg.variance_samples >= 1, "BatchConfig: need at least one variance sample");
}

namespace {

constexpr std::uint64_t kTagSelect = 0x73656c656374ULL;
constexpr std::uint64_t kTagInit = 0x696e6974ULL;
constexpr std::uint64_t kTagHyper = 0x6879706572ULL;
constexpr std::uint64_t kTagVariance = 0x766172ULL;

MaximiseOptions selection_options(const WarpedModel& model, const GaussianMeasure& prior) {
  MaximiseOptions opts;
  const double prior_sd = std::sqrt(prior.covariance().trace() / prior.dim());
  opts.local.initial_step = 0.5 * std::min(model.g_model().params().lengthscale, prior_sd);
  return opts;
}

// Maximises f, drawing a fresh start set once if the first attempt fails.
Point maximise_with_retry(const BatchObjective& f, const GaussianMeasure& prior, const BatchConfig& cfg,
                          int batch_index, int slot, const MaximiseOptions& opts) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::uint64_t seed = derive_seed(cfg.seed, kTagSelect, batch_index, slot, attempt);
    try {
      MaximiseResult r = maximise(f, prior, seed, opts);
      if (r.argmax.allFinite() && std::isfinite(r.value)) return r.argmax;
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("batch selection: acquisition optimiser returned non-finite values twice");
}

}  // namespace

Points select_batch_lp(const WarpedModel& model, const GaussianMeasure& prior, int n, const BatchConfig& cfg,
                       int batch_index) {
  require(n >= 1, "select_batch_lp: n must be at least 1");
  require(model.dim() == prior.dim(), "select_batch_lp: dimension mismatch");
  const double lengthscale = model.g_model().params().lengthscale;
  const BatchObjective base = [&model, &cfg](const Points& q) { return acquisition(model, q, cfg.exec); };
  PenalisedAcquisition pa{base, {}, cfg.p, kSoftMinFloor};
  MaximiseOptions opts = selection_options(model, prior);
  Points batch(n, model.dim());
  for (int k = 0; k < n; ++k) {
    if (k > 0) {
      pa = add_penaliser(pa, batch.row(k - 1).transpose(), base, lengthscale, cfg.slope_fraction);
      opts.avoid = batch.topRows(k);
      opts.avoid_radius = 1e-9 * lengthscale;
      opts.nudge_distance = 1e-6 * lengthscale;
    }
    const BatchObjective f = k == 0 ? base : BatchObjective(pa);
    batch.row(k) = maximise_with_retry(f, prior, cfg, batch_index, k, opts).transpose();
  }
  return batch;
}

WarpedModel hallucinate(const WarpedModel& model, const Point& x) {
  const double m = model.g_model().posterior(x).mean;
  return WarpedModel(model.alpha(), model.g_model().with_observation(x, m));
}

Points select_batch_kb(const WarpedModel& model, const GaussianMeasure& prior, int n, const BatchConfig& cfg,
                       int batch_index) {
  require(n >= 1, "select_batch_kb: n must be at least 1");
  require(model.dim() == prior.dim(), "select_batch_kb: dimension mismatch");
  WarpedModel current = model;
  const MaximiseOptions opts = selection_options(model, prior);
  Points batch(n, model.dim());
  for (int k = 0; k < n; ++k) {
    const BatchObjective f = [&current, &cfg](const Points& q) { return acquisition(current, q, cfg.exec); };
    batch.row(k) = maximise_with_retry(f, prior, cfg, batch_index, k, opts).transpose();
    if (k + 1 < n) current = hallucinate(current, batch.row(k).transpose());
  }
  return batch;
}

namespace {

// Evaluates the integrand at every row; the first invalid value (negative or
// non-finite) is reported through `bad`.
Eigen::VectorXd evaluate_integrand(const Integrand& f, const Points& x, Exec exec, Eigen::Index& bad) {
  const Eigen::VectorXd v = kernels::map_rows(f, x, exec);
  bad = -1;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || v[i] < 0.0) {
      bad = i;
      break;
    }
  }
  return v;
}

std::string describe_bad(const Points& x, const Eigen::VectorXd& v, Eigen::Index i) {
  std::ostringstream msg;
  msg << "integrand returned " << v[i] << " at (";
  for (Eigen::Index k = 0; k < x.cols(); ++k) msg << (k ? ", " : "") << x(i, k);
  msg << ")";
  return msg.str();
}

}  // namespace

QuadratureTrace run_batch_bq(const IntegrationProblem& problem, const BatchConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  const GaussianMeasure& prior = problem.prior;
  QuadratureTrace trace;

  std::mt19937_64 init_rng(derive_seed(cfg.seed, kTagInit));
  trace.inputs = prior.sample(init_rng, cfg.initial_design);
  Eigen::Index bad = -1;
  trace.values = evaluate_integrand(problem.integrand, trace.inputs, cfg.exec, bad);
  if (bad >= 0) {
    trace.aborted = true;
    trace.diagnostic = describe_bad(trace.inputs, trace.values, bad);
    return trace;
  }

  std::optional<KernelParams> params;
  for (int batch_index = 0;; ++batch_index) {
    const WarpedTargets w = warp_targets(trace.values, cfg.min_fraction);
    params = optimise_hyperparams(trace.inputs, w.g, cfg.hyper_restarts,
                                  derive_seed(cfg.seed, kTagHyper, batch_index), params)
                 .params;
    const WarpedModel model(w.alpha, fit_gp(trace.inputs, w.g, *params));
    TraceRecord rec;
    rec.batch_index = batch_index;
    rec.n_evaluations = static_cast<int>(trace.values.size());
    rec.estimate = wsabi_integral_mean(model, prior);
    rec.estimate_variance = wsabi_integral_variance(model, prior, cfg.variance_samples,
                                                    derive_seed(cfg.seed, kTagVariance, batch_index));
    rec.wallclock_ms = elapsed_ms();
    trace.records.push_back(rec);

    const int used = rec.n_evaluations;
    if (used >= cfg.budget) break;
    const int n = std::min(cfg.batch_size, cfg.budget - used);
    const Points batch = cfg.method == BatchMethod::kKrigingBeliever
                             ? select_batch_kb(model, prior, n, cfg, batch_index + 1)
                             : select_batch_lp(model, prior, n, cfg, batch_index + 1);
    const Eigen::VectorXd values = evaluate_integrand(problem.integrand, batch, cfg.exec, bad);
    if (bad >= 0) {
      trace.aborted = true;
      trace.diagnostic = describe_bad(batch, values, bad);
      return trace;
    }
    Points xs(trace.inputs.rows() + n, trace.inputs.cols());
    xs << trace.inputs, batch;
    Eigen::VectorXd vs(trace.values.size() + n);
    vs << trace.values, values;
    trace.inputs = std::move(xs);
    trace.values = std::move(vs);
  }
  return trace;
}

}  // namespace batchquad
