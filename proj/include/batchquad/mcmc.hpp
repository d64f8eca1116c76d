#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "batchquad/gaussian_measure.hpp"

namespace batchquad {

using LogDensity = std::function<double(const Point&)>;

struct ChainConfig {
  int n_chains = 1;
  int burn_in = 500;
  int samples_per_chain = 1000;
  double proposal_sd = 0.5;
  std::uint64_t seed = 0;
};

void validate(const ChainConfig& cfg);

// One random-walk Metropolis-Hastings chain.
struct Chain {
  // Post-burn-in states, one per row.
  Points samples;
  // log_target at each retained state.
  Eigen::VectorXd log_target;
  // Every state visited, including burn-in, with its log_target. Row i is
  // the state after i + 1 target evaluations (row 0 is the initial point).
  Points states;
  Eigen::VectorXd state_log_target;
  int accepted = 0;
  int proposals = 0;
};

// Isotropic Gaussian proposals with sd cfg.proposal_sd; burn_in + samples_per_chain
// target evaluations in total. Deterministic in (cfg.seed, chain_index).
Chain mh_chain(const LogDensity& log_target, const Point& init, const ChainConfig& cfg, int chain_index);

// Independent chains, one per row of `inits`, returned in chain order.
std::vector<Chain> run_parallel_chains(const LogDensity& log_target, const ChainConfig& cfg, const Points& inits);

// Acceptance probability min(1, exp(delta)).
double mh_acceptance(double delta_log_target);

// (1/N) sum_i ell(theta_i) over prior draws.
double estimate_evidence_prior_mc(const std::function<double(const Point&)>& likelihood,
                                  const GaussianMeasure& prior, int n_samples, std::uint64_t seed);

// N / sum_i 1/ell(theta_i) over posterior samples.
double estimate_evidence_harmonic(const Points& chain_samples,
                                  const std::function<double(const Point&)>& likelihood);
// Same estimator from log-likelihood values, returning log Z.
double log_evidence_harmonic(const Eigen::VectorXd& log_likelihoods);

}  // namespace batchquad
