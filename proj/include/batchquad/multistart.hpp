#pragma once

#include <cstdint>
#include <functional>

#include "batchquad/gaussian_measure.hpp"

namespace batchquad {

// Evaluates a scalar field and its gradient at every row of a point list in
// one call. This is the unit of data-parallel work for the optimiser.
using BatchObjective = std::function<BatchEval(const Points&)>;

inline constexpr int kStartsPerDimension = 10;

// 10 * d independent draws from the prior, one per row.
Points sample_starts(const GaussianMeasure& prior, std::uint64_t seed);

// Sum of f over `count` concatenated d-dimensional blocks. Blocks are laid out
// contiguously: block i occupies entries [i d, (i + 1) d).
class StackedObjective {
 public:
  StackedObjective(BatchObjective f, int dim, int count);

  int dim() const { return dim_; }
  int count() const { return count_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(dim_) * count_; }

  Points unstack(const Eigen::VectorXd& z) const;
  Eigen::VectorXd stack(const Points& blocks) const;

  // Per-block values and gradients at the blocks of z.
  BatchEval evaluate_blocks(const Eigen::VectorXd& z) const;
  // Evaluates only the listed blocks.
  BatchEval evaluate_blocks(const Points& blocks) const;
  // Summed value and concatenated gradient.
  std::pair<double, Eigen::VectorXd> operator()(const Eigen::VectorXd& z) const;

 private:
  BatchObjective f_;
  int dim_;
  int count_;
};

StackedObjective concat_objective(BatchObjective f, const Points& starts);

enum class LocalMethod {
  // Block-diagonal BFGS with a backtracking line search on the summed objective.
  kQuasiNewton,
  // Gradient ascent with a constant step; blocks evolve independently.
  kFixedStep,
};

struct LocalOptions {
  LocalMethod method = LocalMethod::kQuasiNewton;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  // Length of the first quasi-Newton step in each block.
  double initial_step = 0.5;
  // Step multiplier for kFixedStep.
  double fixed_step = 0.1;
};

struct StackedResult {
  Points points;           // best point found per block
  Eigen::VectorXd values;  // f at those points
  int iterations = 0;
};

// Ascends the stacked objective from `starts`. Each block keeps the best point
// it has visited, so no block ends below its start value.
StackedResult ascend_stacked(const StackedObjective& obj, const Points& starts, const LocalOptions& opts);

struct MaximiseOptions {
  LocalOptions local;
  // Starts closer than avoid_radius to any row of `avoid` are nudged by
  // nudge_distance in a seeded random direction.
  Points avoid;
  double avoid_radius = 0.0;
  double nudge_distance = 0.0;
};

struct MaximiseResult {
  Point argmax;
  double value = 0.0;
};

// Multi-start maximisation from prior draws, all starts advanced jointly.
MaximiseResult maximise(const BatchObjective& f, const GaussianMeasure& prior, std::uint64_t seed,
                        const MaximiseOptions& opts = {});
MaximiseResult maximise_from(const BatchObjective& f, Points starts, std::uint64_t seed,
                             const MaximiseOptions& opts = {});

}  // namespace batchquad
