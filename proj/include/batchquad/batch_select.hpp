#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "batchquad/multistart.hpp"
#include "batchquad/warped_bq.hpp"

namespace batchquad {

inline constexpr int kDefaultSoftMinExponent = -6;
inline constexpr double kDefaultSlopeFraction = 0.5;
inline constexpr double kSoftMinFloor = 1e-12;

// C(x) = slope_fraction * lipschitz * |x - center|
struct LipschitzCone {
  Point center;
  double lipschitz = 0.0;
  double slope_fraction = kDefaultSlopeFraction;

  double slope() const { return slope_fraction * lipschitz; }
  double value(const Point& x) const { return slope() * (x - center).norm(); }
};

struct SoftMin {
  double value = 0.0;
  // d value / d component; zero for components held at the floor.
  Eigen::VectorXd weights;
};

// (sum_i v_i^p)^(1/p) with every v_i floored at `floor`, evaluated as
// min * (sum_i (v_i / min)^p)^(1/p).
SoftMin soft_min(const Eigen::VectorXd& components, int p, double floor = kSoftMinFloor);

// Base acquisition soft-minimised against a set of Lipschitz cones.
struct PenalisedAcquisition {
  BatchObjective base;
  std::vector<LipschitzCone> cones;
  int p = kDefaultSoftMinExponent;
  double floor = kSoftMinFloor;

  BatchEval operator()(const Points& q) const;
};

std::pair<double, Eigen::VectorXd> penalised_value(const PenalisedAcquisition& pa, const Point& x);

// Largest |grad acq| found by a projected ascent confined to the ball of
// radius `lengthscale` around x0: 30 steps of length 0.1 lengthscale, with
// the gradient of |grad acq| from central differences (step 1e-4 lengthscale).
// From a stationary x0 the ascent is run both ways along the direction of
// fastest growth and the larger result kept.
double estimate_local_lipschitz(const BatchObjective& acq, const Point& x0, double lengthscale);

PenalisedAcquisition add_penaliser(const PenalisedAcquisition& pa, const Point& x0,
                                   const BatchObjective& acq_for_lipschitz, double lengthscale,
                                   double slope_fraction = kDefaultSlopeFraction);

enum class BatchMethod { kKrigingBeliever, kLocalPenalisation };

std::string to_string(BatchMethod m);

struct BatchConfig {
  int batch_size = 1;
  BatchMethod method = BatchMethod::kKrigingBeliever;
  int budget = 103;
  double min_fraction = kDefaultMinFraction;
  double slope_fraction = kDefaultSlopeFraction;
  int p = kDefaultSoftMinExponent;
  std::uint64_t seed = 0;
  int initial_design = 3;
  int hyper_restarts = 5;
  int variance_samples = kDefaultVarianceSamples;
  Exec exec = Exec::kParallel;
};

void validate(const BatchConfig& cfg);

// Batch of n points by local penalisation. `batch_index` selects the seed
// stream so successive batches of one run draw different starts.
Points select_batch_lp(const WarpedModel& model, const GaussianMeasure& prior, int n, const BatchConfig& cfg,
                       int batch_index = 0);

// Batch of n points by Kriging Believer: each selection is conditioned into
// the g-model at its current posterior mean before the next is chosen.
Points select_batch_kb(const WarpedModel& model, const GaussianMeasure& prior, int n, const BatchConfig& cfg,
                       int batch_index = 0);

// The g-model conditioned on its own posterior mean at x.
WarpedModel hallucinate(const WarpedModel& model, const Point& x);

using Integrand = std::function<double(const Point&)>;

struct IntegrationProblem {
  Integrand integrand;
  GaussianMeasure prior;
};

struct TraceRecord {
  int batch_index = 0;
  int n_evaluations = 0;
  double estimate = 0.0;
  double estimate_variance = 0.0;
  double wallclock_ms = 0.0;
};

struct QuadratureTrace {
  std::vector<TraceRecord> records;
  bool aborted = false;
  std::string diagnostic;
  // Evaluated locations and values, in evaluation order.
  Points inputs;
  Eigen::VectorXd values;
};

// Initial design from the prior, then select / evaluate / re-warp / refit /
// record until the evaluation budget is spent. The last batch is truncated
// so the budget is never exceeded.
QuadratureTrace run_batch_bq(const IntegrationProblem& problem, const BatchConfig& cfg);

}  // namespace batchquad
