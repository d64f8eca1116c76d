#include "batchquad/mcmc.hpp"

#include <cmath>
#include <random>

namespace batchquad {

void validate(const ChainConfig& cfg) {
  require(cfg.n_chains >= 1, "ChainConfig: need at least one chain");
  require(cfg.burn_in >= 0, "ChainConfig: burn_in must be non-negative");
  require(cfg.samples_per_chain >= 1, "ChainConfig: need at least one sample per chain");
  require(cfg.proposal_sd > 0.0, "ChainConfig: proposal_sd must be positive");
}

double mh_acceptance(double delta_log_target) {
  if (std::isnan(delta_log_target)) return 0.0;
  return delta_log_target >= 0.0 ? 1.0 : std::exp(delta_log_target);
}

Chain mh_chain(const LogDensity& log_target, const Point& init, const ChainConfig& cfg, int chain_index) {
  validate(cfg);
  double current = log_target(init);
  if (!std::isfinite(current)) throw ArgumentError("mh_chain: log target is not finite at the initial point");
  const Eigen::Index d = init.size();
  const int total = cfg.burn_in + cfg.samples_per_chain;
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x6d68ULL, chain_index));
  std::normal_distribution<double> normal(0.0, cfg.proposal_sd);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Chain chain;
  chain.states.resize(total, d);
  chain.state_log_target.resize(total);
  Point x = init;
  chain.states.row(0) = x.transpose();
  chain.state_log_target[0] = current;
  Point proposal(d);
  for (int i = 1; i < total; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) proposal[k] = x[k] + normal(rng);
    const double lp = log_target(proposal);
    const double u = unif(rng);
    ++chain.proposals;
    if (u < mh_acceptance(lp - current)) {
      x = proposal;
      current = lp;
      ++chain.accepted;
    }
    chain.states.row(i) = x.transpose();
    chain.state_log_target[i] = current;
  }
  chain.samples = chain.states.bottomRows(cfg.samples_per_chain);
  chain.log_target = chain.state_log_target.tail(cfg.samples_per_chain);
  return chain;
}

std::vector<Chain> run_parallel_chains(const LogDensity& log_target, const ChainConfig& cfg, const Points& inits) {
  validate(cfg);
  require(inits.rows() == cfg.n_chains, "run_parallel_chains: need one initial point per chain");
  std::vector<Chain> chains(static_cast<std::size_t>(cfg.n_chains));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < cfg.n_chains; ++c) {
    try {
      chains[c] = mh_chain(log_target, inits.row(c).transpose(), cfg, c);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return chains;
}

double estimate_evidence_prior_mc(const std::function<double(const Point&)>& likelihood,
                                  const GaussianMeasure& prior, int n_samples, std::uint64_t seed) {
  require(n_samples >= 1, "estimate_evidence_prior_mc: need at least one sample");
  std::mt19937_64 rng(seed);
  const Points theta = prior.sample(rng, n_samples);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < theta.rows(); ++i) sum += likelihood(theta.row(i).transpose());
  return sum / n_samples;
}

double estimate_evidence_harmonic(const Points& chain_samples,
                                  const std::function<double(const Point&)>& likelihood) {
  require(chain_samples.rows() >= 1, "estimate_evidence_harmonic: need at least one sample");
  double inv = 0.0;
  for (Eigen::Index i = 0; i < chain_samples.rows(); ++i) {
    const double l = likelihood(chain_samples.row(i).transpose());
    if (!(l > 0.0)) throw NumericalError("estimate_evidence_harmonic: zero likelihood at a posterior sample");
    inv += 1.0 / l;
  }
  return static_cast<double>(chain_samples.rows()) / inv;
}

double log_evidence_harmonic(const Eigen::VectorXd& log_likelihoods) {
  require(log_likelihoods.size() >= 1, "log_evidence_harmonic: need at least one sample");
  require(log_likelihoods.allFinite(), "log_evidence_harmonic: non-finite log likelihood");
  // log N - logsumexp(-log ell)
  const double peak = (-log_likelihoods).maxCoeff();
  const double lse = peak + std::log((-log_likelihoods.array() - peak).exp().sum());
  return std::log(static_cast<double>(log_likelihoods.size())) - lse;
}

}  // namespace batchquad
