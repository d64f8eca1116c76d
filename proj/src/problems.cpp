#include "batchquad/problems.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

namespace batchquad {

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kInModel:
      return "inmodel";
    case ExperimentKind::kMixture:
      return "mixture";
    case ExperimentKind::kEvidence:
      return "evidence";
  }
  return "unknown";
}

double Problem::report(double z) const {
  if (!log_scale) return z;
  return z > 0.0 ? std::log(z) + log_offset : -std::numeric_limits<double>::infinity();
}

double Problem::report_variance(double z, double variance) const {
  if (!log_scale) return variance;
  // delta method: var(log Z) ~= var(Z) / Z^2
  return z > 0.0 ? variance / (z * z) : std::numeric_limits<double>::infinity();
}

namespace {

constexpr std::uint64_t kTagPoints = 0x707473ULL;
constexpr std::uint64_t kTagValues = 0x76616c73ULL;
constexpr double kRefinementTolerance = 1e-4;

void check_refinement(const char* what, double coarse, double fine) {
  const double rel = std::abs(fine - coarse) / std::max(std::abs(fine), 1e-300);
  if (!(rel < kRefinementTolerance)) {
    std::ostringstream msg;
    msg << what << ": ground truth failed refinement check (coarse " << coarse << ", fine " << fine
        << ", relative change " << rel << ")";
    throw NumericalError(msg.str());
  }
}

}  // namespace

Problem gen_inmodel_problem(std::uint64_t seed, int grid_resolution) {
  constexpr int kSupportPoints = 300;
  constexpr double kSupportBox = 5.0;
  constexpr double kGridBox = 6.0;
  require(grid_resolution >= 3, "gen_inmodel_problem: grid resolution must be at least 3");
  const KernelParams params{1.0, 1.0};
  std::mt19937_64 rng(derive_seed(seed, kTagPoints));
  std::uniform_real_distribution<double> unif(-kSupportBox, kSupportBox);
  Points x(kSupportPoints, 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = unif(rng);
    x(i, 1) = unif(rng);
  }
  const Eigen::VectorXd g = sample_gp_prior(params, x, derive_seed(seed, kTagValues));
  auto model = std::make_shared<const GpModel>(fit_gp(x, g, params));

  Problem p{ExperimentKind::kInModel, {}, {}, GaussianMeasure::isotropic(2, 1.0), {}, false, 0.0};
  p.integrand = [model](const Point& q) {
    const double m = model->posterior_mean(q);
    return 0.5 * m * m;
  };
  p.log_integrand = [f = p.integrand](const Point& q) { return std::log(f(q)); };
  const GaussianMeasure prior = p.prior;
  auto weighted = [f = p.integrand, prior](const Point& q) { return f(q) * prior.density(q); };
  const double coarse = kernels::trapezoid_2d(weighted, -kGridBox, kGridBox, grid_resolution);
  const double fine = kernels::trapezoid_2d(weighted, -kGridBox, kGridBox, 2 * grid_resolution - 1);
  check_refinement("inmodel", coarse, fine);
  p.truth = {coarse, GroundTruth::Method::kGrid, grid_resolution};
  return p;
}

double mixture_density(const std::vector<MixtureComponent>& components, const Point& x) {
  double s = 0.0;
  for (const auto& c : components) {
    const double d = static_cast<double>(x.size());
    s += c.weight * std::exp(-0.5 * (x - c.mean).squaredNorm() / c.variance -
                             0.5 * d * std::log(2.0 * std::numbers::pi * c.variance));
  }
  return s;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  require(n >= 1, "gauss_hermite: need at least one node");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  Eigen::VectorXd w = eig.eigenvectors().row(0).transpose().array().square().matrix();
  return {eig.eigenvalues(), w / w.sum()};
}

Problem mixture_problem(std::vector<MixtureComponent> components, double prior_variance) {
  require(!components.empty(), "mixture_problem: need at least one component");
  const int d = static_cast<int>(components.front().mean.size());
  for (const auto& c : components) {
    require(c.mean.size() == d && c.variance > 0.0 && c.weight >= 0.0, "mixture_problem: invalid component");
  }
  Problem p{ExperimentKind::kMixture, {}, {}, GaussianMeasure::isotropic(d, prior_variance), {}, false, 0.0};
  auto comps = std::make_shared<const std::vector<MixtureComponent>>(std::move(components));
  p.integrand = [comps](const Point& x) { return mixture_density(*comps, x); };
  p.log_integrand = [comps](const Point& x) { return std::log(mixture_density(*comps, x)); };
  double z = 0.0;
  for (const auto& c : *comps) {
    const double v = c.variance + prior_variance;
    z += c.weight * std::exp(-0.5 * c.mean.squaredNorm() / v - 0.5 * d * std::log(2.0 * std::numbers::pi * v));
  }
  p.truth = {z, GroundTruth::Method::kAnalytic, 0};
  return p;
}

std::vector<MixtureComponent> draw_mixture(std::uint64_t seed, const MixtureOptions& opts) {
  require(opts.dim >= 1 && opts.min_components >= 1 && opts.max_components >= opts.min_components,
          "draw_mixture: invalid options");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(opts.min_components, opts.max_components);
  std::uniform_real_distribution<double> var(opts.min_variance, opts.max_variance);
  std::uniform_real_distribution<double> loc(-opts.mean_bound, opts.mean_bound);
  const int k = count(rng);
  std::vector<MixtureComponent> comps(static_cast<std::size_t>(k));
  for (auto& c : comps) {
    c.variance = var(rng);
    c.mean.resize(opts.dim);
    for (int j = 0; j < opts.dim; ++j) c.mean[j] = loc(rng);
    c.weight = 1.0 / k;
  }
  return comps;
}

Problem gen_mixture_problem(std::uint64_t seed, const MixtureOptions& opts) {
  Problem p = mixture_problem(draw_mixture(seed, opts), opts.prior_variance);
  // Cross-check the analytic value with a tensor Gauss-Hermite rule against the prior.
  const int nodes = opts.dim <= 2 ? 64 : 24;
  const auto [z, w] = gauss_hermite(nodes);
  const double sd = std::sqrt(opts.prior_variance);
  const auto total = static_cast<std::int64_t>(std::pow(nodes, opts.dim));
  double sum = 0.0;
  Point x(opts.dim);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    std::int64_t rem = idx;
    double weight = 1.0;
    for (int j = 0; j < opts.dim; ++j) {
      const auto k = static_cast<Eigen::Index>(rem % nodes);
      rem /= nodes;
      x[j] = sd * z[k];
      weight *= w[k];
    }
    sum += weight * p.integrand(x);
  }
  check_refinement("mixture", p.truth.value, sum);
  return p;
}

double branin(const Point& x) {
  require(x.size() == 2, "branin: input must be two-dimensional");
  constexpr double pi = std::numbers::pi;
  constexpr double a = 1.0;
  constexpr double b = 5.1 / (4.0 * pi * pi);
  constexpr double c = 5.0 / pi;
  constexpr double r = 6.0;
  constexpr double s = 10.0;
  constexpr double t = 1.0 / (8.0 * pi);
  const double u = x[1] - b * x[0] * x[0] + c * x[0] - r;
  return a * u * u + s * (1.0 - t) * std::cos(x[0]) + s;
}

namespace {

constexpr std::uint64_t kTagBranin = 0x6272616e696eULL;
constexpr int kEiCandidates = 2000;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

Point uniform_branin_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u0(-5.0, 10.0);
  std::uniform_real_distribution<double> u1(0.0, 15.0);
  Point p(2);
  p[0] = u0(rng);
  p[1] = u1(rng);
  return p;
}

bool is_duplicate(const Points& x, Eigen::Index n, const Point& p) {
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((x.row(i).transpose() - p).norm() < 1e-8) return true;
  }
  return false;
}

}  // namespace

BraninData branin_bo_dataset(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, kTagBranin));
  BraninData data{Points(kBraninTotalPoints, 2), Eigen::VectorXd(kBraninTotalPoints)};
  Eigen::Index n = 0;
  auto add = [&](Point p) {
    while (is_duplicate(data.inputs, n, p)) p = uniform_branin_point(rng);
    data.inputs.row(n) = p.transpose();
    data.values[n] = branin(p);
    ++n;
  };
  for (int i = 0; i < kBraninInitialPoints; ++i) add(uniform_branin_point(rng));
  while (n < kBraninTotalPoints) {
    const Eigen::VectorXd y = data.values.head(n);
    const double centre = y.mean();
    const double sd = std::sqrt((y.array() - centre).square().sum() / static_cast<double>(n - 1));
    const GpModel gp = fit_gp(data.inputs.topRows(n), y.array() - centre, KernelParams{sd, 2.0});
    const double best = y.minCoeff() - centre;
    Points cand(kEiCandidates, 2);
    for (int c = 0; c < kEiCandidates; ++c) cand.row(c) = uniform_branin_point(rng).transpose();
    const PosteriorBatch post = gp.posterior(cand, Exec::kSerial);
    Eigen::Index arg = 0;
    double best_ei = -1.0;
    for (int c = 0; c < kEiCandidates; ++c) {
      const double s = std::sqrt(post.variance[c]);
      const double imp = best - post.mean[c];
      const double ei = s > 0.0 ? imp * normal_cdf(imp / s) + s * normal_pdf(imp / s) : std::max(imp, 0.0);
      if (ei > best_ei) {
        best_ei = ei;
        arg = c;
      }
    }
    add(cand.row(arg).transpose());
  }
  return data;
}

double evidence_log_likelihood(const Points& x, const Eigen::VectorXd& y, const Point& theta) {
  require(theta.size() == 2, "evidence_log_likelihood: theta must be (log lengthscale, log output scale)");
  try {
    return log_marginal_likelihood(fit_gp(x, y, KernelParams{std::exp(theta[1]), std::exp(theta[0])}));
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

Problem gen_evidence_problem(std::uint64_t seed, int grid_resolution) {
  constexpr double kGridBox = 4.0;
  require(grid_resolution >= 3, "gen_evidence_problem: grid resolution must be at least 3");
  const BraninData data = branin_bo_dataset(seed);
  const double centre = data.values.mean();
  const double sd = std::sqrt((data.values.array() - centre).square().sum() / (data.values.size() - 1.0));
  const auto x = std::make_shared<const Points>(data.inputs);
  const auto y = std::make_shared<const Eigen::VectorXd>((data.values.array() - centre) / sd);

  Problem p{ExperimentKind::kEvidence, {}, {}, GaussianMeasure::isotropic(2, 1.0), {}, true, 0.0};
  auto lml = [x, y](const Point& theta) { return evidence_log_likelihood(*x, *y, theta); };

  // Offset so the largest grid value of the scaled integrand is 1.
  const double h = 2.0 * kGridBox / (grid_resolution - 1);
  Points nodes(static_cast<Eigen::Index>(grid_resolution) * grid_resolution, 2);
  for (int i = 0; i < grid_resolution; ++i) {
    for (int j = 0; j < grid_resolution; ++j) {
      nodes(static_cast<Eigen::Index>(i) * grid_resolution + j, 0) = -kGridBox + i * h;
      nodes(static_cast<Eigen::Index>(i) * grid_resolution + j, 1) = -kGridBox + j * h;
    }
  }
  const double offset = kernels::map_rows(lml, nodes).maxCoeff();
  if (!std::isfinite(offset)) throw NumericalError("evidence: log marginal likelihood non-finite on the whole grid");
  p.log_offset = offset;
  p.log_integrand = [lml, offset](const Point& theta) { return lml(theta) - offset; };
  p.integrand = [f = p.log_integrand](const Point& theta) { return std::exp(f(theta)); };

  const GaussianMeasure prior = p.prior;
  auto log_weighted = [f = p.log_integrand, prior](const Point& t) { return f(t) + prior.log_density(t); };
  const double coarse = offset + kernels::trapezoid_2d_log(log_weighted, -kGridBox, kGridBox, grid_resolution);
  const double fine = offset + kernels::trapezoid_2d_log(log_weighted, -kGridBox, kGridBox, 2 * grid_resolution - 1);
  check_refinement("evidence", coarse, fine);
  p.truth = {coarse, GroundTruth::Method::kGrid, grid_resolution};
  return p;
}

}  // namespace batchquad
