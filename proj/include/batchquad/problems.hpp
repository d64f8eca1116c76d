#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchquad/batch_select.hpp"
#include "batchquad/mcmc.hpp"

namespace batchquad {

enum class ExperimentKind { kInModel, kMixture, kEvidence };

std::string to_string(ExperimentKind k);

struct GroundTruth {
  enum class Method { kGrid, kAnalytic };
  // Z for in-model and mixture problems, log Z for the evidence problem.
  double value = 0.0;
  Method method = Method::kGrid;
  // Grid nodes per axis, when method is kGrid.
  int resolution = 0;
};

// An integrand, its prior and a certified reference value.
struct Problem {
  ExperimentKind kind = ExperimentKind::kInModel;
  Integrand integrand;
  // log of the integrand, when it can be evaluated without underflow.
  LogDensity log_integrand;
  GaussianMeasure prior;
  GroundTruth truth;
  // When set, estimates and the truth are reported as log Z; the integrand
  // is the true one scaled by exp(-log_offset).
  bool log_scale = false;
  double log_offset = 0.0;

  IntegrationProblem integration() const { return {integrand, prior}; }
  // Maps an estimate of the integral of `integrand` to the reported scale.
  double report(double z) const;
  double report_variance(double z, double variance) const;
};

inline constexpr int kDefaultGridResolution = 501;

// 2D sample from the GP prior (s = l = 1) at 300 seeded points, interpolated
// by its posterior mean g; ell = g^2 / 2 against N(0, I). Truth by trapezoid
// grid over [-6, 6]^2, checked against a refined grid.
Problem gen_inmodel_problem(std::uint64_t seed, int grid_resolution = kDefaultGridResolution);

struct MixtureComponent {
  Point mean;
  double variance = 1.0;
  double weight = 1.0;
};

struct MixtureOptions {
  int dim = 4;
  int min_components = 10;
  int max_components = 15;
  double min_variance = 1.0;
  double max_variance = 4.0;
  double mean_bound = 3.0;
  double prior_variance = 4.0;
};

// sum_i w_i N(x; mu_i, s_i^2 I) against an isotropic zero-mean Gaussian prior,
// with the analytic truth sum_i w_i N(mu_i; 0, (s_i^2 + prior_variance) I).
Problem mixture_problem(std::vector<MixtureComponent> components, double prior_variance);
std::vector<MixtureComponent> draw_mixture(std::uint64_t seed, const MixtureOptions& opts);
Problem gen_mixture_problem(std::uint64_t seed, const MixtureOptions& opts = {});

double mixture_density(const std::vector<MixtureComponent>& components, const Point& x);

// Branin-Hoo on [-5, 10] x [0, 15].
double branin(const Point& x);

struct BraninData {
  Points inputs;
  Eigen::VectorXd values;
};

inline constexpr int kBraninInitialPoints = 5;
inline constexpr int kBraninTotalPoints = 20;

// 5 seeded uniform points then expected-improvement steps (GP with l = 2,
// s = sample sd of the centred values) up to 20 evaluations.
BraninData branin_bo_dataset(std::uint64_t seed);

// theta = (log l, log s) -> exp(log marginal likelihood of the standardised
// Branin data), prior N(0, I). Truth by log-space trapezoid grid on [-4, 4]^2.
Problem gen_evidence_problem(std::uint64_t seed, int grid_resolution = kDefaultGridResolution);

// Log marginal likelihood of `data` under an SE GP with parameters exp(theta).
double evidence_log_likelihood(const Points& x, const Eigen::VectorXd& y, const Point& theta);

// Nodes (rows) and weights of an n-point Gauss-Hermite rule for E[f(z)], z ~ N(0, 1).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n);

}  // namespace batchquad
