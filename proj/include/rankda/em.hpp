#pragma once

// Monte Carlo EM for the hyperparameter lambda of a_k = s * exp(lambda |zeta_k|)
// and the observed-information standard error of its estimate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankda/error.hpp"
#include "rankda/linalg.hpp"
#include "rankda/model.hpp"
#include "rankda/samplers.hpp"
#include "rankda/special_functions.hpp"

namespace rankda {

/// Theta components below this are floored before taking logs.
inline constexpr double kLogThetaFloor = 1e-300;
/// Upper limit for automatic expansion of the lambda search interval.
inline constexpr double kLambdaCap = 50.0;

struct EmConfig {
  double lambda0 = 0.5;
  double scale = 1.0;
  ChainConfig inner_chain{2000, 200, 1, 1, Kernel::sandwich_uniform};
  std::size_t inner_chains = 1;
  std::size_t max_iters = 50;
  std::size_t plateau_window = 5;
  double plateau_range = 0.05;
  ChainConfig final_chain{20000, 1000, 1, 2, Kernel::sandwich_uniform};
  double search_lo = 0.0;
  double search_hi = 10.0;

  void validate() const {
    if (!(search_lo >= 0.0 && search_lo < search_hi)) throw ConfigError("em: need 0 <= search_lo < search_hi");
    if (plateau_window < 3) throw ConfigError("em: plateau_window must be at least 3");
    if (!(plateau_range > 0.0)) throw ConfigError("em: plateau_range must be positive");
    if (max_iters == 0) throw ConfigError("em: max_iters must be positive");
    if (inner_chains == 0) throw ConfigError("em: inner_chains must be positive");
    if (!(lambda0 >= search_lo && lambda0 <= search_hi)) throw ConfigError("em: lambda0 outside the search interval");
    if (!(scale > 0.0)) throw ConfigError("em: scale must be positive");
    inner_chain.validate();
    final_chain.validate();
  }
};

struct EmResult {
  double lambda_hat = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
  double information = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> trajectory;     // lambda^(0), lambda^(1), ...
  std::vector<std::size_t> inner_sizes;  // draws behind each update
  std::vector<double> elogtheta;      // final E(log theta_i | y, lambda_hat) estimates
  bool plateau_reached = false;
  bool boundary = false;
  bool information_positive = false;
};

/// sum_i a_i E_i - sum_i log Gamma(a_i) + log Gamma(sum_i a_i) with
/// a_i = scale * exp(lambda |zeta_i|).
inline double q_objective(double lambda, std::span<const double> elogtheta, const GroupTables& tables,
                          double scale = 1.0) {
  if (elogtheta.size() != tables.size()) throw std::invalid_argument("q_objective: elogtheta length mismatch");
  long double linear = 0.0L, lg = 0.0L, a0 = 0.0L;
  const double log_scale = std::log(scale);
  for (std::size_t i = 0; i < elogtheta.size(); ++i) {
    if (!(elogtheta[i] <= 0.0)) throw std::invalid_argument("q_objective: elogtheta entries must be <= 0");
    const double u = log_scale + lambda * tables.cycles_offset(i);
    if (u > 700.0) throw NumericalError("q_objective: exp(lambda |zeta|) overflows at lambda = " + std::to_string(lambda));
    const double a = std::exp(u);
    linear += static_cast<long double>(a) * elogtheta[i];
    lg += log_gamma(a);
    a0 += a;
  }
  return static_cast<double>(linear - lg + static_cast<long double>(log_gamma(static_cast<double>(a0))));
}

struct MStepResult {
  double lambda = 0.0;
  double objective = 0.0;
  double upper = 0.0;       // search interval actually used
  bool boundary = false;    // maximizer at the lower limit or at kLambdaCap
  bool degenerate = false;  // objective constant in lambda (p = 1)
};

/// Maximizer of q_objective over [lo, hi]. A 50-point grid is scanned; while
/// the objective still rises at the upper end, hi is doubled (up to
/// kLambdaCap) and the scan repeated. Every local maximum of the grid is then
/// refined by golden-section search to 1e-6 and the best one kept, so a
/// sharp interior peak between grid points is not lost to a flat end.
inline MStepResult m_step(std::span<const double> elogtheta, const GroupTables& tables, double lo, double hi,
                          double scale = 1.0) {
  if (!(lo >= 0.0 && lo < hi)) throw std::invalid_argument("m_step: need 0 <= lo < hi");
  MStepResult res;
  if (tables.items() == 1) {
    res.lambda = lo;
    res.objective = q_objective(lo, elogtheta, tables, scale);
    res.upper = hi;
    res.degenerate = true;
    return res;
  }
  auto f = [&](double x) { return q_objective(x, elogtheta, tables, scale); };
  constexpr std::size_t kGrid = 50;
  std::vector<double> xs(kGrid), vs(kGrid);
  for (;;) {
    for (std::size_t i = 0; i < kGrid; ++i) {
      xs[i] = lo + (hi - lo) * static_cast<double>(i) / (kGrid - 1);
      vs[i] = f(xs[i]);
    }
    if (vs[kGrid - 1] <= vs[kGrid - 2] || hi >= kLambdaCap) break;
    hi = std::min(2.0 * hi, kLambdaCap);
  }
  auto golden = [&](double a, double b) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-6) {
      if (fc >= fd) {
        b = d; d = c; fd = fc; c = b - r * (b - a); fc = f(c);
      } else {
        a = c; c = d; fc = fd; d = a + r * (b - a); fd = f(d);
      }
    }
    return 0.5 * (a + b);
  };
  res.objective = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kGrid; ++i) {
    const bool left_ok = i == 0 || vs[i] >= vs[i - 1];
    const bool right_ok = i + 1 == kGrid || vs[i] >= vs[i + 1];
    if (!left_ok || !right_ok) continue;
    double x = golden(xs[i == 0 ? 0 : i - 1], xs[std::min(i + 1, kGrid - 1)]);
    double v = f(x);
    // The golden-section interior never reaches the ends exactly.
    if (i == 0 && vs[0] >= v) {
      x = lo;
      v = vs[0];
    }
    if (i + 1 == kGrid && vs[i] >= v) {
      x = hi;
      v = vs[i];
    }
    if (v > res.objective) {
      res.objective = v;
      res.lambda = x;
    }
  }
  res.upper = hi;
  res.boundary = res.lambda - lo < 1e-6 || (hi >= kLambdaCap && hi - res.lambda < 1e-6);
  return res;
}

/// Trace average of log max(theta_i, kLogThetaFloor) for each i.
inline std::vector<double> estimate_elogtheta(std::span<const ChainTrace> traces) {
  if (traces.empty() || traces[0].empty()) throw std::invalid_argument("estimate_elogtheta: empty trace");
  const std::size_t n = traces[0].states();
  std::vector<long double> acc(n, 0.0L);
  std::size_t count = 0;
  for (const auto& t : traces) {
    for (std::size_t r = 0; r < t.size(); ++r) {
      const auto th = t.theta(r);
      for (std::size_t i = 0; i < n; ++i) acc[i] += std::log(std::max(th[i], kLogThetaFloor));
    }
    count += t.size();
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(acc[i] / static_cast<long double>(count));
  return out;
}

/// Observed information I(lambda | y) = -d^2/d lambda^2 log c_lambda(y), from
/// the posterior mean of log theta and the posterior variance of
/// sum_i |zeta_i| a_i log theta_i:
///   -I = sum_i c_i^2 a_i (E log theta_i - a_i trigamma(a_i) - digamma(a_i))
///        + trigamma(a0) (sum_i c_i a_i)^2 + digamma(a0) sum_i c_i^2 a_i + Var
/// with c_i = |zeta_i| and a0 = sum_i a_i.
inline double lambda_information(double lambda, std::span<const double> elogtheta, double variance,
                                 const GroupTables& tables, double scale = 1.0) {
  if (elogtheta.size() != tables.size()) throw std::invalid_argument("lambda_information: length mismatch");
  double s1 = 0.0, s2 = 0.0, a0 = 0.0, terms = 0.0;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const double c = tables.cycles_offset(i);
    const double a = scale * std::exp(lambda * c);
    a0 += a;
    s1 += c * a;
    s2 += c * c * a;
    terms += c * c * a * (elogtheta[i] - trigamma(a) * a - digamma(a));
  }
  const double second_derivative = terms + trigamma(a0) * s1 * s1 + digamma(a0) * s2 + variance;
  return -second_derivative;
}

/// Information from retained draws at lambda: E and Var are trace averages.
inline double lambda_information(double lambda, std::span<const ChainTrace> traces, const GroupTables& tables,
                                 double scale = 1.0) {
  const auto elog = estimate_elogtheta(traces);
  std::vector<double> w(tables.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double c = tables.cycles_offset(i);
    w[i] = c * scale * std::exp(lambda * c);
  }
  long double sum = 0.0L, sum_sq = 0.0L;
  std::size_t count = 0;
  for (const auto& t : traces) {
    for (std::size_t r = 0; r < t.size(); ++r) {
      const auto th = t.theta(r);
      long double v = 0.0L;
      for (std::size_t i = 0; i < w.size(); ++i) v += w[i] * std::log(std::max(th[i], kLogThetaFloor));
      sum += v;
      sum_sq += v * v;
    }
    count += t.size();
  }
  double variance = 0.0;
  if (count > 1) {
    const long double mean = sum / count;
    variance = static_cast<double>(std::max(0.0L, (sum_sq - count * mean * mean) / (count - 1)));
  }
  return lambda_information(lambda, elog, variance, tables, scale);
}

/// I(lambda)^{-1/2}; throws when the estimated information is not positive.
inline double lambda_se(double lambda_hat, std::span<const ChainTrace> traces, const GroupTables& tables,
                        double scale = 1.0) {
  const double info = lambda_information(lambda_hat, traces, tables, scale);
  if (!(info > 0.0)) throw NumericalError("information not positive; increase final chain length");
  return 1.0 / std::sqrt(info);
}

inline double lambda_se(double lambda_hat, const ChainTrace& trace, const GroupTables& tables, double scale = 1.0) {
  return lambda_se(lambda_hat, std::span<const ChainTrace>(&trace, 1), tables, scale);
}

namespace detail {

inline std::vector<ChainTrace> em_chains(const ChainConfig& base, std::uint64_t salt, std::size_t n,
                                         const Model& model) {
  ChainConfig c = base;
  std::uint64_t x = base.seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
  c.seed = splitmix64(x);
  return run_chains(c, model, n);
}

inline bool plateau(const std::vector<double>& traj, std::size_t window, double range) {
  if (traj.size() < window) return false;
  const auto first = traj.end() - static_cast<std::ptrdiff_t>(window);
  const auto [lo, hi] = std::minmax_element(first, traj.end());
  return *hi - *lo < range;
}

}  // namespace detail

/// Stochastic EM: estimate E(log theta | y, lambda^(k)) from sandwich draws,
/// maximize q_objective, repeat until the last plateau_window iterates span
/// less than plateau_range (or max_iters), then one update with the large
/// final chain and a standard error from a further final-size chain at
/// lambda_hat. The hyperparameters of `model` are replaced.
inline EmResult em_run(const EmConfig& config, const Model& model) {
  config.validate();
  const auto& tables = model.tables();
  if (tables.items() < 2) throw ConfigError("em: lambda is not identifiable with a single item");
  EmResult res;
  double lambda = config.lambda0;
  double hi = config.search_hi;
  res.trajectory.push_back(lambda);
  res.inner_sizes.push_back(0);
  auto at = [&](double l) { return model.with_hyper(HyperParams::from_lambda(l, tables, config.scale)); };
  for (std::size_t k = 1; k <= config.max_iters; ++k) {
    const auto traces = detail::em_chains(config.inner_chain, k, config.inner_chains, at(lambda));
    const auto elog = estimate_elogtheta(traces);
    const auto step = m_step(elog, tables, config.search_lo, hi, config.scale);
    hi = step.upper;
    lambda = step.lambda;
    res.trajectory.push_back(lambda);
    res.inner_sizes.push_back(config.inner_chain.retained() * config.inner_chains);
    if (detail::plateau(res.trajectory, config.plateau_window, config.plateau_range)) {
      res.plateau_reached = true;
      break;
    }
  }
  const std::uint64_t final_salt = config.max_iters + 1;
  const auto final_traces = detail::em_chains(config.final_chain, final_salt, config.inner_chains, at(lambda));
  const auto step = m_step(estimate_elogtheta(final_traces), tables, config.search_lo, hi, config.scale);
  res.lambda_hat = step.lambda;
  res.boundary = step.boundary;
  res.trajectory.push_back(res.lambda_hat);
  res.inner_sizes.push_back(config.final_chain.retained() * config.inner_chains);

  const auto se_traces = detail::em_chains(config.final_chain, final_salt + 1, config.inner_chains, at(res.lambda_hat));
  res.elogtheta = estimate_elogtheta(se_traces);
  res.information = lambda_information(res.lambda_hat, se_traces, tables, config.scale);
  res.information_positive = res.information > 0.0;
  if (res.information_positive) res.se = 1.0 / std::sqrt(res.information);
  return res;
}

}  // namespace rankda
