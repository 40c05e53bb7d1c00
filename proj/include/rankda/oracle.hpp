#pragma once

// Exact ground truth for small instances: enumerated posteriors of the
// central ranks, Beta-mixture marginals of theta, the pi-chain transition
// matrix of the two-block sampler, the sandwich middle kernel R, and spectra
// of finite reversible kernels.
//
// Joint states (pi_1, ..., pi_g) are enumerated in mixed radix with pi_1
// varying slowest; for p = g = 2 the order is
//   (z1,z1), (z1,z2), (z2,z1), (z2,z2).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankda/error.hpp"
#include "rankda/linalg.hpp"
#include "rankda/model.hpp"
#include "rankda/quadrature.hpp"
#include "rankda/random.hpp"
#include "rankda/samplers.hpp"
#include "rankda/special_functions.hpp"

namespace rankda {

/// Largest (p!)^g enumerated by default.
inline constexpr std::size_t kDefaultEnumerationCap = 1000000;
/// Largest q for which a full transition matrix is built by default.
inline constexpr std::size_t kDefaultKernelCap = 36;

/// Enumeration of S_p^g in the documented order.
class StateSpace {
public:
  StateSpace() = default;
  StateSpace(std::size_t per_category, std::size_t categories, std::size_t cap = kDefaultEnumerationCap)
      : n_(per_category), g_(categories) {
    if (n_ == 0) throw std::invalid_argument("StateSpace: empty category state set");
    q_ = 1;
    for (std::size_t j = 0; j < g_; ++j) {
      if (q_ > cap / n_) {
        throw ConfigError("state space (p!)^g exceeds the enumeration cap " + std::to_string(cap));
      }
      q_ *= n_;
    }
  }

  std::size_t per_category() const { return n_; }
  std::size_t categories() const { return g_; }
  std::size_t size() const { return q_; }

  CentralRanks ranks(std::size_t s) const {
    if (s >= q_) throw std::out_of_range("StateSpace: state out of range");
    std::vector<PermIndex> v(g_);
    for (std::size_t j = g_; j-- > 0;) {
      v[j] = PermIndex::from_offset(s % n_);
      s /= n_;
    }
    return CentralRanks(std::move(v));
  }

  std::size_t index(const CentralRanks& pi) const {
    check_ranks(pi, g_, n_);
    std::size_t s = 0;
    for (PermIndex k : pi) s = s * n_ + k.offset();
    return s;
  }

  friend bool operator==(const StateSpace&, const StateSpace&) = default;

private:
  std::size_t n_ = 1;
  std::size_t g_ = 0;
  std::size_t q_ = 1;
};

struct ExactPosteriorPi {
  StateSpace space;
  std::vector<double> log_probs;  // normalized
  std::vector<double> probs;

  double prob(const CentralRanks& pi) const { return probs[space.index(pi)]; }
  /// Marginal pmf of pi_j over the p! rankings.
  std::vector<double> marginal(std::size_t j) const {
    if (j >= space.categories()) throw std::out_of_range("ExactPosteriorPi::marginal: category out of range");
    std::vector<double> out(space.per_category(), 0.0);
    for (std::size_t s = 0; s < probs.size(); ++s) out[space.ranks(s)[j].offset()] += probs[s];
    return out;
  }
};

struct TransitionMatrix {
  StateSpace space;
  Matrix entries;

  std::size_t size() const { return entries.rows(); }
  double operator()(std::size_t s, std::size_t t) const { return entries(s, t); }

  /// Largest deviation of a row sum from one.
  double row_sum_error() const {
    double e = 0.0;
    for (std::size_t s = 0; s < size(); ++s) {
      double r = 0.0;
      for (std::size_t t = 0; t < size(); ++t) r += entries(s, t);
      e = std::max(e, std::fabs(r - 1.0));
    }
    return e;
  }
};

/// p(pi | y, lambda) by enumeration, normalized with log-sum-exp.
inline ExactPosteriorPi exact_posterior_pi(const Model& model, std::size_t cap = kDefaultEnumerationCap) {
  ExactPosteriorPi out{StateSpace(model.states(), model.categories(), cap), {}, {}};
  const std::size_t q = out.space.size();
  out.log_probs.resize(q);
  for (std::size_t s = 0; s < q; ++s) out.log_probs[s] = log_post_pi(out.space.ranks(s), model);
  const double z = log_sum_exp(out.log_probs);
  if (!std::isfinite(z)) throw NumericalError("exact_posterior_pi: posterior has no mass");
  out.probs.resize(q);
  for (std::size_t s = 0; s < q; ++s) {
    out.log_probs[s] -= z;
    out.probs[s] = std::exp(out.log_probs[s]);
  }
  return out;
}

namespace detail {

/// The Beta mixture of theta_k: (weight, alpha, beta) with equal components merged.
struct BetaComponent {
  double weight, alpha, beta;
};

inline std::vector<BetaComponent> theta_mixture(PermIndex k, const Model& model, const ExactPosteriorPi& post) {
  if (k.value() < 1 || k.value() > model.states()) throw std::out_of_range("theta marginal: component out of range");
  const double n = static_cast<double>(model.counts().total());
  const double ak = model.hyp().a[k.offset()];
  const double a0 = model.hyp().a0;
  std::vector<std::pair<std::int64_t, double>> by_count;
  for (std::size_t s = 0; s < post.probs.size(); ++s) {
    if (post.probs[s] == 0.0) continue;
    const auto m = m_counts(post.space.ranks(s), model);
    by_count.emplace_back(m[k.offset()], post.probs[s]);
  }
  std::sort(by_count.begin(), by_count.end());
  std::vector<BetaComponent> out;
  for (const auto& [mk, w] : by_count) {
    const double alpha = static_cast<double>(mk) + ak;
    if (!out.empty() && out.back().alpha == alpha) {
      out.back().weight += w;
    } else {
      out.push_back({w, alpha, n + a0 - alpha});
    }
  }
  return out;
}

}  // namespace detail

/// Density of theta_k on the points of x_grid (each in (0,1)).
inline std::vector<double> exact_theta_marginal_density(PermIndex k, std::span<const double> x_grid, const Model& model,
                                                        const ExactPosteriorPi& post) {
  const auto mix = detail::theta_mixture(k, model, post);
  std::vector<double> out(x_grid.size(), 0.0);
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    const double x = x_grid[i];
    if (!(x > 0.0 && x < 1.0)) throw std::domain_error("exact_theta_marginal_density: grid point outside (0,1)");
    for (const auto& c : mix) out[i] += c.weight * std::exp(log_beta_density(x, c.alpha, c.beta));
  }
  return out;
}

inline std::vector<double> exact_theta_marginal_density(PermIndex k, std::span<const double> x_grid,
                                                        const Model& model) {
  return exact_theta_marginal_density(k, x_grid, model, exact_posterior_pi(model));
}

/// CDF of theta_k, usable as the reference of ks_distance.
class ThetaMarginalCdf {
public:
  ThetaMarginalCdf(PermIndex k, const Model& model, const ExactPosteriorPi& post)
      : mix_(detail::theta_mixture(k, model, post)) {}
  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double f = 0.0;
    for (const auto& c : mix_) f += c.weight * incomplete_beta(c.alpha, c.beta, x);
    return std::clamp(f, 0.0, 1.0);
  }

private:
  std::vector<detail::BetaComponent> mix_;
};

/// Posterior mean vector and covariance matrix of log theta.
struct LogThetaMoments {
  std::vector<double> mean;
  Matrix cov;
};

inline LogThetaMoments exact_log_theta_moments(const Model& model, const ExactPosteriorPi& post) {
  const std::size_t n = model.states();
  const auto& a = model.hyp().a;
  const double alpha0 = static_cast<double>(model.counts().total()) + model.hyp().a0;
  const double psi0 = digamma(alpha0);
  const double tri0 = trigamma(alpha0);
  LogThetaMoments out{std::vector<double>(n, 0.0), Matrix(n, n)};
  Matrix second(n, n);
  std::vector<double> mu(n);
  for (std::size_t s = 0; s < post.probs.size(); ++s) {
    const double w = post.probs[s];
    if (w == 0.0) continue;
    const auto m = m_counts(post.space.ranks(s), model);
    for (std::size_t k = 0; k < n; ++k) mu[k] = digamma(static_cast<double>(m[k]) + a[k]) - psi0;
    for (std::size_t i = 0; i < n; ++i) {
      out.mean[i] += w * mu[i];
      for (std::size_t j = 0; j < n; ++j) {
        double c = -tri0 + mu[i] * mu[j];
        if (i == j) c += trigamma(static_cast<double>(m[i]) + a[i]);
        second(i, j) += w * c;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.cov(i, j) = second(i, j) - out.mean[i] * out.mean[j];
  return out;
}

/// log c_lambda(y): the marginal likelihood of the data under the model's
/// hyperparameters and prior, via the Dirichlet-multinomial identity.
inline double log_marginal_likelihood(const Model& model, std::size_t cap = kDefaultEnumerationCap) {
  const StateSpace space(model.states(), model.categories(), cap);
  std::vector<double> terms(space.size());
  for (std::size_t s = 0; s < space.size(); ++s) terms[s] = log_post_pi(space.ranks(s), model);
  const auto& h = model.hyp();
  double c = log_sum_exp(terms) - log_gamma(static_cast<double>(model.counts().total()) + h.a0) + log_gamma(h.a0);
  for (double ak : h.a) c -= log_gamma(ak);
  return c;
}

namespace detail {

inline void require_p2g2(const Model& model, const char* who) {
  if (model.tables().items() != 2 || model.categories() != 2) {
    throw std::invalid_argument(std::string(who) + ": closed forms need p = 2 and g = 2");
  }
}

inline void check_rows(const TransitionMatrix& k, double tol, const char* who) {
  const double e = k.row_sum_error();
  if (!(e <= tol)) {
    throw NumericalError(std::string(who) + ": row sums deviate from one by " + std::to_string(e));
  }
}

}  // namespace detail

/// The 4x4 pi-chain transition matrix of the two-block sampler for p = g = 2
/// under a uniform prior on pi. Entry (s, t) is
///   [1/B(m_s + a)] * integral_0^1 r(x) x^{m_s1+m_t1+a_1-1} (1-x)^{m_s2+m_t2+a_2-1} dx,
/// r(x) = 1 / sum_u x^{m_u1} (1-x)^{m_u2}, with m_u the m-counts of state u.
/// The model's prior on pi is ignored.
inline TransitionMatrix build_K_pi(const Model& model, const QuadratureOptions& opt = {}) {
  detail::require_p2g2(model, "build_K_pi");
  const StateSpace space(2, 2);
  std::vector<std::array<double, 2>> m(4);
  for (std::size_t s = 0; s < 4; ++s) {
    const auto ms = m_counts(space.ranks(s), model);
    m[s] = {static_cast<double>(ms[0]), static_cast<double>(ms[1])};
  }
  const double a1 = model.hyp().a[0], a2 = model.hyp().a[1];
  auto log_inv_r = [&](double lx, double l1x) {
    std::array<double, 4> t{};
    for (std::size_t u = 0; u < 4; ++u) t[u] = m[u][0] * lx + m[u][1] * l1x;
    return log_sum_exp(t);
  };
  TransitionMatrix k{space, Matrix(4, 4)};
  for (std::size_t s = 0; s < 4; ++s) {
    const double log_prefactor = -log_beta(m[s][0] + a1, m[s][1] + a2);
    for (std::size_t t = 0; t < 4; ++t) {
      auto log_f = [&](double x) {
        const double lx = std::log(x), l1x = std::log1p(-x);
        return (m[s][0] + m[t][0] + a1 - 1.0) * lx + (m[s][1] + m[t][1] + a2 - 1.0) * l1x - log_inv_r(lx, l1x);
      };
      k.entries(s, t) = std::exp(log_prefactor + integrate_log(log_f, 0.0, 1.0, opt).log_value);
    }
  }
  detail::check_rows(k, 1e-8, "build_K_pi");
  return k;
}

struct KernelOptions {
  std::size_t cap = kDefaultKernelCap;
  QuadratureOptions quadrature{};
  std::size_t mc_draws = 1000000;  // per row, used when p > 2
  std::uint64_t mc_seed = 1;
};

/// K(pi_a -> pi_b) = integral p(pi_b | theta, y) p(theta | pi_a, y) d theta for
/// any p and g with (p!)^g <= cap, honoring the prior on pi. For p = 2 theta is
/// one-dimensional and each entry is an adaptive quadrature; for p > 2 every
/// row is a Monte Carlo average over mc_draws Dirichlet draws.
inline TransitionMatrix build_K_pi_general(const Model& model, const KernelOptions& opt = {}) {
  const StateSpace space(model.states(), model.categories(), opt.cap);
  const std::size_t q = space.size(), g = model.categories(), n = model.states();
  TransitionMatrix k{space, Matrix(q, q)};
  std::vector<std::vector<std::int64_t>> m(q);
  for (std::size_t s = 0; s < q; ++s) m[s] = m_counts(space.ranks(s), model);
  const auto& a = model.hyp().a;

  // log p(pi = state t | theta, y) for all t, given log theta.
  std::vector<double> w(n);
  std::vector<double> log_gamma_j(g * n);
  auto log_conditionals = [&](std::span<const double> log_theta, std::vector<double>& out) {
    for (std::size_t j = 0; j < g; ++j) {
      gamma_log_weights(log_theta, j, model, w);
      const double z = log_sum_exp(w);
      for (std::size_t r = 0; r < n; ++r) log_gamma_j[j * n + r] = w[r] - z;
    }
    out.assign(q, 0.0);
    for (std::size_t t = 0; t < q; ++t) {
      std::size_t rest = t;
      double v = 0.0;
      for (std::size_t j = g; j-- > 0;) {
        v += log_gamma_j[j * n + rest % n];
        rest /= n;
      }
      out[t] = v;
    }
  };

  if (n == 2) {
    std::vector<double> cond;
    for (std::size_t s = 0; s < q; ++s) {
      const double alpha = static_cast<double>(m[s][0]) + a[0];
      const double beta = static_cast<double>(m[s][1]) + a[1];
      for (std::size_t t = 0; t < q; ++t) {
        auto log_f = [&](double x) {
          const std::array<double, 2> lt = {std::log(x), std::log1p(-x)};
          log_conditionals(lt, cond);
          return log_beta_density(x, alpha, beta) + cond[t];
        };
        k.entries(s, t) = integrate_log(log_f, 0.0, 1.0, opt.quadrature).value();
      }
    }
    detail::check_rows(k, 1e-8, "build_K_pi_general");
    return k;
  }

  Rng rng(opt.mc_seed, 0);
  std::vector<double> shapes(n), cond;
  for (std::size_t s = 0; s < q; ++s) {
    for (std::size_t i = 0; i < n; ++i) shapes[i] = static_cast<double>(m[s][i]) + a[i];
    std::vector<double> acc(q, 0.0);
    for (std::size_t d = 0; d < opt.mc_draws; ++d) {
      const auto theta = rng.dirichlet(shapes);
      log_conditionals(log_of(theta), cond);
      for (std::size_t t = 0; t < q; ++t) acc[t] += std::exp(cond[t]);
    }
    for (std::size_t t = 0; t < q; ++t) k.entries(s, t) = acc[t] / static_cast<double>(opt.mc_draws);
  }
  detail::check_rows(k, 1e-8, "build_K_pi_general");
  return k;
}

/// Explicit Metropolis-Hastings kernel of the sandwich middle step. Each
/// sigma is proposed with probability weights[sigma] (normalized here), the
/// move pi -> sigma o pi is accepted with min(1, p(pi'|y)/p(pi|y)), and the
/// rejected mass stays on the diagonal.
inline TransitionMatrix build_R(const ExactPosteriorPi& post, const GroupTables& tables,
                                std::span<const double> weights) {
  const auto& space = post.space;
  if (space.per_category() != tables.size()) throw std::invalid_argument("build_R: tables do not match the posterior");
  if (weights.size() != tables.size()) throw std::invalid_argument("build_R: one weight per permutation required");
  double wsum = 0.0;
  for (double v : weights) {
    if (!(v >= 0.0)) throw std::invalid_argument("build_R: negative proposal weight");
    wsum += v;
  }
  if (!(wsum > 0.0)) throw std::invalid_argument("build_R: proposal weights sum to zero");
  const std::size_t q = space.size();
  TransitionMatrix r{space, Matrix(q, q)};
  for (std::size_t s = 0; s < q; ++s) {
    const auto pi = space.ranks(s);
    const double ls = post.log_probs[s];
    for (std::size_t sigma = 0; sigma < tables.size(); ++sigma) {
      const double w = weights[sigma] / wsum;
      if (w == 0.0) continue;
      const std::size_t t = space.index(act(sigma, pi, tables));
      const double lt = post.log_probs[t];
      double acc;
      if (lt == -std::numeric_limits<double>::infinity()) acc = 0.0;
      else if (ls == -std::numeric_limits<double>::infinity()) acc = 1.0;
      else acc = lt >= ls ? 1.0 : std::exp(lt - ls);
      r.entries(s, t) += w * acc;
      r.entries(s, s) += w * (1.0 - acc);
    }
  }
  return r;
}

/// R for the uniform-sigma sandwich step.
inline TransitionMatrix build_R(const ExactPosteriorPi& post, const GroupTables& tables) {
  const std::vector<double> uniform(tables.size(), 1.0);
  return build_R(post, tables, uniform);
}

/// R for the local sandwich step (sigma proportional to a_k, identity excluded).
inline TransitionMatrix build_R_local(const ExactPosteriorPi& post, const Model& model) {
  return build_R(post, model.tables(), local_proposal_weights(model));
}

namespace detail {

/// D^{1/2} K D^{-1/2}, symmetrized, after checking reversibility.
inline Matrix symmetrize(const Matrix& k, std::span<const double> stationary, double tol) {
  const std::size_t q = k.rows();
  if (k.cols() != q || stationary.size() != q) throw std::invalid_argument("spectrum: dimension mismatch");
  for (double v : stationary) {
    if (!(v > 0.0)) throw std::invalid_argument("spectrum: stationary distribution must be positive");
  }
  Matrix s(q, q);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      const double fij = stationary[i] * k(i, j), fji = stationary[j] * k(j, i);
      if (std::fabs(fij - fji) > tol) {
        throw NumericalError("spectrum: kernel is not reversible (flow imbalance " + std::to_string(fij - fji) +
                             " between states " + std::to_string(i) + " and " + std::to_string(j) + ")");
      }
      s(i, j) = std::sqrt(stationary[i] / stationary[j]) * k(i, j);
    }
  }
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i + 1; j < q; ++j) s(i, j) = s(j, i) = 0.5 * (s(i, j) + s(j, i));
  }
  return s;
}

}  // namespace detail

inline constexpr double kReversibilityTolerance = 1e-8;

/// Eigenvalues of a kernel reversible with respect to `stationary`, descending.
inline std::vector<double> spectrum(const Matrix& k, std::span<const double> stationary,
                                    double reversibility_tol = kReversibilityTolerance) {
  return jacobi_eigen(detail::symmetrize(k, stationary, reversibility_tol)).values;
}

inline std::vector<double> spectrum(const TransitionMatrix& k, std::span<const double> stationary,
                                    double reversibility_tol = kReversibilityTolerance) {
  return spectrum(k.entries, stationary, reversibility_tol);
}

struct SpectrumComparison {
  std::vector<double> rho;        // eigenvalues of K, descending
  std::vector<double> rho_tilde;  // eigenvalues of R K, descending
  double max_violation = 0.0;     // max_i (rho_tilde_i - rho_i), clipped at 0
  bool dominated(double tol = 1e-10) const { return max_violation <= tol; }
};

/// Spectra of K and of the composed kernel R K. With Ks and Rs the symmetric
/// forms, R K is similar to Rs Ks whose eigenvalues are those of
/// Ks^{1/2} Rs Ks^{1/2}; this needs Ks positive semidefinite, which holds
/// for two-block Gibbs kernels.
inline SpectrumComparison sandwich_spectrum_compare(const TransitionMatrix& k, const TransitionMatrix& r,
                                                    std::span<const double> stationary) {
  if (!(k.space == r.space)) throw std::invalid_argument("sandwich_spectrum_compare: state lists differ");
  const std::size_t q = k.size();
  const Matrix ks = detail::symmetrize(k.entries, stationary, kReversibilityTolerance);
  const Matrix rs = detail::symmetrize(r.entries, stationary, kReversibilityTolerance);
  const auto ek = jacobi_eigen(ks);
  // Ks^{1/2}; tiny negative eigenvalues are quadrature noise.
  Matrix half(q, q);
  for (std::size_t i = 0; i < q; ++i) {
    const double lam = ek.values[i];
    if (lam < -1e-9) throw NumericalError("sandwich_spectrum_compare: K is not positive semidefinite");
    const double root = std::sqrt(std::max(lam, 0.0));
    for (std::size_t a = 0; a < q; ++a)
      for (std::size_t b = 0; b < q; ++b) half(a, b) += root * ek.vectors(a, i) * ek.vectors(b, i);
  }
  Matrix sandwich = half * rs * half;
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i + 1; j < q; ++j) sandwich(i, j) = sandwich(j, i) = 0.5 * (sandwich(i, j) + sandwich(j, i));
  }
  SpectrumComparison out{ek.values, jacobi_eigen(sandwich).values, 0.0};
  for (std::size_t i = 0; i < q; ++i) out.max_violation = std::max(out.max_violation, out.rho_tilde[i] - out.rho[i]);
  return out;
}

}  // namespace rankda
