#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "rankda/oracle.hpp"

using namespace rankda;
using rankda::testing::make_model;
using rankda::testing::ranks;
using rankda::testing::two_mode_model;

namespace {

// Reference four-state transition matrix of the two-mode instance.
const double kReference[4][4] = {{0.0570291, 0.7460761, 0.1478273, 0.0490667},
                                 {0.0000006, 0.9999993, 0.0000000, 0.0000001},
                                 {0.0000004, 0.0000001, 0.9999981, 0.0000014},
                                 {0.0574185, 0.1962019, 0.6818719, 0.0645066}};

TransitionMatrix two_state(double alpha, double beta) {
  TransitionMatrix k{StateSpace(2, 1), Matrix(2, 2)};
  k.entries(0, 0) = 1 - alpha;
  k.entries(0, 1) = alpha;
  k.entries(1, 0) = beta;
  k.entries(1, 1) = 1 - beta;
  return k;
}

}  // namespace

TEST(StateSpace, OrderingAndCap) {
  const StateSpace s(2, 2);
  EXPECT_EQ(s.ranks(0), ranks({1, 1}));
  EXPECT_EQ(s.ranks(1), ranks({1, 2}));
  EXPECT_EQ(s.ranks(2), ranks({2, 1}));
  EXPECT_EQ(s.ranks(3), ranks({2, 2}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(s.index(s.ranks(i)), i);
  EXPECT_THROW(StateSpace(6, 3, 36), ConfigError);
  EXPECT_NO_THROW(StateSpace(6, 2, 36));
  EXPECT_THROW(StateSpace(720, 3), ConfigError);
}

TEST(ExactPosterior, Examples) {
  const auto flat = exact_posterior_pi(make_model(3, {std::vector<std::int64_t>(6, 0), std::vector<std::int64_t>(6, 0)}, 1.0));
  for (double v : flat.probs) EXPECT_NEAR(v, 1.0 / 36, 1e-14);

  const auto small = exact_posterior_pi(make_model(2, {{1, 0}}, std::log(2.0), 0.5));
  EXPECT_NEAR(small.probs[0], 2.0 / 3, 1e-14);
  EXPECT_NEAR(small.probs[1], 1.0 / 3, 1e-14);

  const auto post = exact_posterior_pi(two_mode_model());
  double total = 0.0;
  for (double v : post.probs) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(post.prob(ranks({1, 2})), 0.75, 0.01);
  EXPECT_GT(post.prob(ranks({2, 1})), 0.2);
  EXPECT_LT(post.prob(ranks({1, 1})) + post.prob(ranks({2, 2})), 1e-5);
  const auto marg = post.marginal(0);
  EXPECT_NEAR(marg[0], post.probs[0] + post.probs[1], 1e-15);
  EXPECT_THROW(exact_posterior_pi(two_mode_model(), 3), ConfigError);
}

TEST(ThetaMarginal, Examples) {
  std::vector<double> grid;
  for (int i = 1; i < 100; ++i) grid.push_back(i / 100.0);
  const auto t = rankda::testing::tables(2);
  Model flat(t, RankCounts::zeros(2, 1), HyperParams::from_lambda(0.0, *t), PriorPi::uniform(1, 2));
  for (double v : exact_theta_marginal_density(PermIndex(1), grid, flat)) EXPECT_NEAR(v, 1.0, 1e-12);

  // A point-mass prior leaves a single Beta component.
  Model pm(t, RankCounts(2, {{7, 2}}), HyperParams::from_lambda(0.0, *t), PriorPi::point_mass(1, 2, 0, PermIndex(2)));
  const auto d = exact_theta_marginal_density(PermIndex(1), grid, pm);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(d[i], std::exp(log_beta_density(grid[i], 3, 8)), 1e-10);
}

TEST(ThetaMarginal, IntegratesToOneAndIsBimodalOnTwoModeInstance) {
  const Model m = two_mode_model();
  const auto post = exact_posterior_pi(m);
  const ThetaMarginalCdf cdf(PermIndex(1), m, post);
  auto log_density = [&](double x) {
    const std::vector<double> g = {x};
    return std::log(exact_theta_marginal_density(PermIndex(1), g, m, post)[0]);
  };
  EXPECT_NEAR(integrate_log(log_density, 0.0, 1.0, {1e-9}).value(), 1.0, 1e-6);
  EXPECT_NEAR(cdf(1.0), 1.0, 1e-15);
  EXPECT_NEAR(cdf(0.5) - cdf(0.3), integrate_log(log_density, 0.3, 0.5, {1e-10}).value(), 1e-8);

  std::vector<double> grid(10000);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = (static_cast<double>(i) + 0.5) / 10000.0;
  const auto d = exact_theta_marginal_density(PermIndex(1), grid, m, post);
  int maxima = 0;
  for (std::size_t i = 1; i + 1 < d.size(); ++i) maxima += d[i] > d[i - 1] && d[i] > d[i + 1] && d[i] > 1e-3;
  EXPECT_EQ(maxima, 2);
}

TEST(LogThetaMoments, MatchesDirectQuadratureForPointMass) {
  // With one pi the posterior of theta_1 is Beta(alpha, beta) and
  // E log theta_1 = psi(alpha) - psi(alpha + beta).
  const auto t = rankda::testing::tables(2);
  Model pm(t, RankCounts(2, {{7, 2}}), HyperParams::from_lambda(0.3, *t), PriorPi::point_mass(1, 2, 0, PermIndex(1)));
  const auto post = exact_posterior_pi(pm);
  const auto mom = exact_log_theta_moments(pm, post);
  const double alpha = 7 + pm.hyp().a[0], beta = 2 + pm.hyp().a[1];
  EXPECT_NEAR(mom.mean[0], digamma(alpha) - digamma(alpha + beta), 1e-13);
  EXPECT_NEAR(mom.cov(0, 0), trigamma(alpha) - trigamma(alpha + beta), 1e-13);
  EXPECT_NEAR(mom.cov(0, 1), -trigamma(alpha + beta), 1e-13);
}

TEST(MarginalLikelihood, Examples) {
  EXPECT_NEAR(log_marginal_likelihood(make_model(2, {{0, 0}, {0, 0}}, 0.7)), 0.0, 1e-13);
  EXPECT_NEAR(log_marginal_likelihood(make_model(2, {{1, 0}}, 0.0)), std::log(0.5), 1e-14);
  // Direct theta-integral of the mixture for a p = 2 instance.
  const Model m = make_model(2, {{4, 1}, {2, 3}}, 0.6);
  auto log_f = [&](double x) {
    double s = 0.0;
    for (std::size_t a = 1; a <= 2; ++a)
      for (std::size_t b = 1; b <= 2; ++b)
        s += 0.25 * std::exp(log_likelihood(ThetaVector({x, 1 - x}), ranks({a, b}), m.counts(), m.tables()));
    return std::log(s) + log_beta_density(x, m.hyp().a[0], m.hyp().a[1]);
  };
  EXPECT_NEAR(log_marginal_likelihood(m), integrate_log(log_f, 0.0, 1.0).log_value, 1e-11);
}

TEST(KPi, ReproducesReferenceMatrix) {
  const auto k = build_K_pi(two_mode_model());
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t t = 0; t < 4; ++t) {
      EXPECT_NEAR(k(s, t), kReference[s][t], 1e-5) << s << "," << t;
      EXPECT_GT(k(s, t), 0.0);
    }
  }
  EXPECT_LT(k.row_sum_error(), 1e-8);
  EXPECT_NEAR(k(2, 3) / (1 - k(2, 2)), 0.74, 0.01);
  EXPECT_THROW(build_K_pi(make_model(2, {{1, 2}}, 0.3)), std::invalid_argument);
}

TEST(KPi, SymmetricDataGivesRelabelingInvariance) {
  const auto k = build_K_pi(make_model(2, {{9, 4}, {4, 9}}, 0.0));
  const std::size_t swap[4] = {3, 2, 1, 0};
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(k(s, t), k(swap[s], swap[t]), 1e-12);
}

TEST(KPiGeneral, AgreesWithClosedFormAndIsReversible) {
  for (const Model& m : {two_mode_model(), make_model(2, {{9, 4}, {6, 2}}, 0.4), make_model(2, {{20, 3}, {1, 30}}, 1.1)}) {
    const auto k = build_K_pi(m);
    const auto kg = build_K_pi_general(m);
    EXPECT_LT(k.entries.max_abs_diff(kg.entries), 1e-4);
    EXPECT_LT(kg.row_sum_error(), 1e-10);
    const auto post = exact_posterior_pi(m);
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(post.probs[s] * kg(s, t), post.probs[t] * kg(t, s), 1e-8);
  }
}

TEST(KPiGeneral, MonteCarloPathForThreeItems) {
  const Model m = make_model(3, {{9, 4, 3, 2, 1, 1}}, 0.5);
  KernelOptions opt;
  opt.mc_draws = 40000;
  const auto k = build_K_pi_general(m, opt);
  EXPECT_LT(k.row_sum_error(), 1e-10);
  const auto post = exact_posterior_pi(m);
  const auto pushed = k.entries.left_multiply(post.probs);
  for (std::size_t s = 0; s < post.probs.size(); ++s) EXPECT_NEAR(pushed[s], post.probs[s], 5e-3);
  KernelOptions tight;
  tight.cap = 5;
  EXPECT_THROW(build_K_pi_general(m, tight), ConfigError);
}

TEST(BuildR, UniformPosteriorAcceptsEverything) {
  const Model m = make_model(2, {{0, 0}, {0, 0}}, 0.0);
  const auto post = exact_posterior_pi(m);
  const auto r = build_R(post, m.tables());
  // sigma o (pi_1, pi_2): half the mass stays, half moves to the swapped pair.
  EXPECT_NEAR(r(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(r(0, 3), 0.5, 1e-15);
  EXPECT_NEAR(r(1, 2), 0.5, 1e-15);
  EXPECT_LT((r.entries * r.entries).max_abs_diff(r.entries), 1e-12);
}

TEST(BuildR, LeavesPosteriorInvariant) {
  for (const Model& m : {two_mode_model(), make_model(3, {{6, 3, 2, 2, 1, 0}, {1, 2, 5, 1, 3, 2}}, 0.3)}) {
    const auto post = exact_posterior_pi(m);
    for (const auto& r : {build_R(post, m.tables()), build_R_local(post, m)}) {
      EXPECT_LT(r.row_sum_error(), 1e-14);
      const auto pushed = r.entries.left_multiply(post.probs);
      for (std::size_t s = 0; s < pushed.size(); ++s) EXPECT_NEAR(pushed[s], post.probs[s], 1e-12);
    }
  }
}

TEST(BuildR, TwoModeInstanceKernelIsNotIdempotent) {
  // With unequal posterior masses the Metropolis step keeps rejected mass on
  // the diagonal, so two steps differ from one; the acceptance suite reports
  // the size of the gap.
  const Model m = two_mode_model();
  const auto post = exact_posterior_pi(m);
  const auto r = build_R(post, m.tables());
  EXPECT_GT((r.entries * r.entries).max_abs_diff(r.entries), 0.1);
}

TEST(Spectrum, Examples) {
  const std::vector<double> u2 = {0.5, 0.5};
  TransitionMatrix id{StateSpace(2, 1), Matrix::identity(2)};
  for (double v : spectrum(id, u2)) EXPECT_NEAR(v, 1.0, 1e-15);
  const double alpha = 0.3, beta = 0.1;
  const std::vector<double> stat = {beta / (alpha + beta), alpha / (alpha + beta)};
  const auto ev = spectrum(two_state(alpha, beta), stat);
  EXPECT_NEAR(ev[0], 1.0, 1e-12);
  EXPECT_NEAR(ev[1], 1 - alpha - beta, 1e-12);
  EXPECT_THROW(spectrum(two_state(alpha, beta), u2), NumericalError);
  const std::vector<double> zero = {0.0, 1.0};
  EXPECT_THROW(spectrum(id, zero), std::invalid_argument);
}

TEST(Spectrum, TwoModeKernelHasNearUnitSecondEigenvalue) {
  const Model m = two_mode_model();
  const auto post = exact_posterior_pi(m);
  const auto ev = spectrum(build_K_pi(m), post.probs);
  EXPECT_NEAR(ev[0], 1.0, 1e-10);
  EXPECT_GT(ev[1], 1 - 1e-5);
  EXPECT_LT(ev[1], 1.0);
}

TEST(SpectrumCompare, IdentityMiddleStepChangesNothing) {
  const Model m = two_mode_model();
  const auto post = exact_posterior_pi(m);
  const auto k = build_K_pi(m);
  const TransitionMatrix id{k.space, Matrix::identity(4)};
  const auto cmp = sandwich_spectrum_compare(k, id, post.probs);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(cmp.rho_tilde[i], cmp.rho[i], 1e-10);
  EXPECT_TRUE(cmp.dominated());
}

TEST(SpectrumCompare, TwoModeInstanceLosesNearUnitEigenvalue) {
  const Model m = two_mode_model();
  const auto post = exact_posterior_pi(m);
  const auto cmp = sandwich_spectrum_compare(build_K_pi(m), build_R(post, m.tables()), post.probs);
  EXPECT_TRUE(cmp.dominated());
  EXPECT_GT(cmp.rho[1], 0.99999);
  EXPECT_LT(cmp.rho_tilde[1], 0.5);
}

TEST(SpectrumCompare, DominanceOnRandomInstances) {
  Rng rng(2718);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::vector<std::int64_t>> n(2, std::vector<std::int64_t>(2));
    for (auto& row : n)
      for (auto& v : row) v = static_cast<std::int64_t>(rng.below(51));
    const double lambda = 2.0 * rng.uniform();
    const Model m = make_model(2, n, lambda);
    const auto post = exact_posterior_pi(m);
    const auto k = build_K_pi_general(m);
    for (const auto& r : {build_R(post, m.tables()), build_R_local(post, m)}) {
      const auto cmp = sandwich_spectrum_compare(k, r, post.probs);
      EXPECT_TRUE(cmp.dominated()) << "rep " << rep << " violation " << cmp.max_violation;
    }
  }
}
