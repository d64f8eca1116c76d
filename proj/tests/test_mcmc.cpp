#include <gtest/gtest.h>

#include <omp.h>

#include "batchquad/mcmc.hpp"
#include "oracles.hpp"

using namespace batchquad;

namespace {

Point p1(double a) { return (Point(1) << a).finished(); }

const LogDensity kStdNormal = [](const Point& x) { return -0.5 * x.squaredNorm(); };

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST(MhAcceptance, Formula) {
  EXPECT_EQ(mh_acceptance(std::log(2.0)), 1.0);
  EXPECT_EQ(mh_acceptance(std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_DOUBLE_EQ(mh_acceptance(std::log(0.25)), 0.25);
  EXPECT_EQ(mh_acceptance(-std::numeric_limits<double>::infinity()), 0.0);
}

TEST(MhChain, StandardNormalMoments) {
  ChainConfig cfg;
  cfg.burn_in = 500;
  cfg.samples_per_chain = 50000;
  cfg.proposal_sd = 1.0;
  cfg.seed = 3;
  const Chain c = mh_chain(kStdNormal, p1(0.0), cfg, 0);
  ASSERT_EQ(c.samples.rows(), 50000);
  ASSERT_EQ(c.states.rows(), 50500);
  const double mean = c.samples.mean();
  const double sd = std::sqrt((c.samples.array() - mean).square().sum() / (c.samples.rows() - 1));
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(sd, 1.0, 0.05);
  EXPECT_GT(c.accepted, 0);
  EXPECT_EQ(c.proposals, 50499);
  EXPECT_EQ(c.samples.row(0), c.states.row(500));
}

TEST(MhChain, BetterProposalsAlwaysAccepted) {
  // Log target increases without bound to the right: rightward moves are
  // always accepted, so every accepted proposal is a rightward step.
  ChainConfig cfg;
  cfg.burn_in = 0;
  cfg.samples_per_chain = 2000;
  cfg.seed = 1;
  const Chain c = mh_chain([](const Point& x) { return 1e6 * x[0]; }, p1(0.0), cfg, 0);
  int rightward = 0;
  for (Eigen::Index i = 1; i < c.states.rows(); ++i) rightward += c.states(i, 0) > c.states(i - 1, 0);
  EXPECT_EQ(rightward, c.accepted);
  EXPECT_GT(c.accepted, 900);
}

TEST(MhChain, Errors) {
  ChainConfig cfg;
  EXPECT_THROW(mh_chain([](const Point&) { return -std::numeric_limits<double>::infinity(); }, p1(0.0), cfg, 0),
               ArgumentError);
  cfg.samples_per_chain = 0;
  EXPECT_THROW(validate(cfg), ArgumentError);
  cfg = {};
  cfg.burn_in = -1;
  EXPECT_THROW(validate(cfg), ArgumentError);
  cfg = {};
  cfg.proposal_sd = 0.0;
  EXPECT_THROW(validate(cfg), ArgumentError);
}

// Piecewise-constant target on five unit bins. Inside a bin the stationary
// density is uniform, so the bin-to-bin kernel is
// P_ij = min(1, w_j / w_i) * int_0^1 [Phi((j + 1 - i - u) / s) - Phi((j - i - u) / s)] du.
TEST(MhChain, DetailedBalanceOnFiveStates) {
  const std::array<double, 5> w{1, 2, 3, 2, 1};
  const double s = 1.0;
  const LogDensity target = [&](const Point& x) {
    const double b = std::floor(x[0]);
    if (b < 0 || b > 4) return -std::numeric_limits<double>::infinity();
    return std::log(w[static_cast<int>(b)]);
  };
  ChainConfig cfg;
  cfg.burn_in = 1000;
  cfg.samples_per_chain = 1000000;
  cfg.proposal_sd = s;
  cfg.seed = 17;
  const Chain c = mh_chain(target, p1(2.5), cfg, 0);
  Eigen::Matrix<double, 5, 5> counts = Eigen::Matrix<double, 5, 5>::Zero();
  for (Eigen::Index t = 1; t < c.samples.rows(); ++t)
    counts(static_cast<int>(c.samples(t - 1, 0)), static_cast<int>(c.samples(t, 0))) += 1.0;
  for (int i = 0; i < 5; ++i) {
    double stay = 1.0;
    for (int j = 0; j < 5; ++j) {
      if (i == j) continue;
      const double move = oracle::trapezoid_1d(
          [&](double u) { return normal_cdf((j + 1 - i - u) / s) - normal_cdf((j - i - u) / s); }, 0.0, 1.0, 2001);
      const double p = std::min(1.0, w[j] / w[i]) * move;
      stay -= p;
      EXPECT_NEAR(counts(i, j) / counts.row(i).sum(), p, 0.01) << i << "->" << j;
    }
    EXPECT_NEAR(counts(i, i) / counts.row(i).sum(), stay, 0.01) << i;
    EXPECT_NEAR(counts.row(i).sum() / counts.sum(), w[i] / 9.0, 0.01);
  }
  // Detailed balance: the flow matrix is symmetric.
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < i; ++j)
      if (counts(i, j) > 10000) EXPECT_NEAR(counts(i, j) / counts(j, i), 1.0, 0.03);
}

TEST(ParallelChains, SingleChainMatchesMhChain) {
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.burn_in = 50;
  cfg.samples_per_chain = 300;
  cfg.seed = 8;
  const Points init = p1(0.4).transpose();
  const auto chains = run_parallel_chains(kStdNormal, cfg, init);
  ASSERT_EQ(chains.size(), 1u);
  EXPECT_EQ(chains[0].samples, mh_chain(kStdNormal, p1(0.4), cfg, 0).samples);
}

TEST(ParallelChains, PooledMeanAndDeterminism) {
  ChainConfig cfg;
  cfg.n_chains = 4;
  cfg.burn_in = 500;
  cfg.samples_per_chain = 5000;
  cfg.proposal_sd = 1.0;
  cfg.seed = 12;
  Points init(4, 1);
  init << -1.0, -0.5, 0.5, 1.0;
  omp_set_num_threads(1);
  const auto a = run_parallel_chains(kStdNormal, cfg, init);
  omp_set_num_threads(4);
  const auto b = run_parallel_chains(kStdNormal, cfg, init);
  double sum = 0.0;
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(a[c].samples, b[c].samples);
    sum += a[c].samples.sum();
  }
  EXPECT_NEAR(sum / 20000.0, 0.0, 0.05);
  EXPECT_NE(a[0].samples, a[1].samples);
  EXPECT_THROW(run_parallel_chains(kStdNormal, cfg, init.topRows(3)), ArgumentError);
}

TEST(EvidencePriorMc, Examples) {
  const GaussianMeasure prior = GaussianMeasure::isotropic(1, 1.0);
  EXPECT_EQ(estimate_evidence_prior_mc([](const Point&) { return 0.75; }, prior, 17, 1), 0.75);
  const auto lik = [](const Point& x) { return std::exp(-0.5 * x.squaredNorm()) / std::sqrt(2 * M_PI); };
  const double z = estimate_evidence_prior_mc(lik, prior, 100000, 2);
  EXPECT_NEAR(z / (1.0 / std::sqrt(4 * M_PI)), 1.0, 0.02);
  EXPECT_NEAR(1.0 / std::sqrt(4 * M_PI), 0.282095, 1e-6);
  const double z2 = estimate_evidence_prior_mc([&](const Point& x) { return 2.0 * lik(x); }, prior, 1000, 5);
  EXPECT_EQ(z2, 2.0 * estimate_evidence_prior_mc(lik, prior, 1000, 5));
  EXPECT_THROW(estimate_evidence_prior_mc(lik, prior, 0, 1), ArgumentError);
}

TEST(EvidenceHarmonic, Examples) {
  Points s(3, 1);
  s << 0.1, 0.2, 0.3;
  EXPECT_DOUBLE_EQ(estimate_evidence_harmonic(s, [](const Point&) { return 0.4; }), 0.4);
  EXPECT_DOUBLE_EQ(estimate_evidence_harmonic(s.topRows(1), [](const Point& x) { return 1.0 + x[0]; }), 1.1);
  EXPECT_THROW(estimate_evidence_harmonic(s, [](const Point& x) { return x[0] > 0.15 ? 1.0 : 0.0; }), NumericalError);
  const Eigen::VectorXd logs = (Eigen::VectorXd(3) << std::log(0.4), std::log(0.4), std::log(0.4)).finished();
  EXPECT_NEAR(log_evidence_harmonic(logs), std::log(0.4), 1e-15);
}

TEST(EvidenceHarmonic, ConjugateGaussian) {
  // y ~ N(theta, 1), theta ~ N(0, 1): Z = N(y; 0, 2), posterior N(y / 2, 1 / 2).
  const double y = 0.5;
  const auto lik = [y](const Point& t) { return std::exp(-0.5 * (y - t[0]) * (y - t[0])) / std::sqrt(2 * M_PI); };
  const double z = std::exp(-0.25 * y * y) / std::sqrt(4 * M_PI);
  ChainConfig cfg;
  cfg.burn_in = 1000;
  cfg.samples_per_chain = 50000;
  cfg.proposal_sd = 1.0;
  cfg.seed = 21;
  const Chain c = mh_chain([&](const Point& t) { return std::log(lik(t)) - 0.5 * t[0] * t[0]; }, p1(0.0), cfg, 0);
  EXPECT_NEAR(estimate_evidence_harmonic(c.samples, lik) / z, 1.0, 0.25);
}
