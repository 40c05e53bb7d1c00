#pragma once

// Convergence diagnostics: autocorrelation, the potential scale reduction
// factor, and distances between sampled and exact distributions.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankda/error.hpp"
#include "rankda/oracle.hpp"
#include "rankda/samplers.hpp"

namespace rankda {

/// Sample autocorrelations at lags 0..max_lag with the biased (1/n)
/// autocovariance in both numerator and denominator.
inline std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= max_lag) throw std::invalid_argument("acf: series length must exceed max_lag");
  long double mean = 0.0L;
  for (double v : series) mean += v;
  mean /= n;
  std::vector<double> centered(n);
  for (std::size_t t = 0; t < n; ++t) centered[t] = static_cast<double>(series[t] - mean);
  long double c0 = 0.0L;
  for (double v : centered) c0 += static_cast<long double>(v) * v;
  if (!(c0 > 0.0L)) throw NumericalError("acf: constant series");
  std::vector<double> out(max_lag + 1);
  out[0] = 1.0;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    long double c = 0.0L;
    for (std::size_t t = 0; t + lag < n; ++t) c += static_cast<long double>(centered[t]) * centered[t + lag];
    out[lag] = static_cast<double>(c / c0);
  }
  return out;
}

/// Gelman-Rubin potential scale reduction factor, without the
/// degrees-of-freedom correction: with W the mean of the per-chain (1/n)
/// variances and B/n the (1/m) variance of the chain means,
///   PSRF = sqrt((W + B/n) / W),
/// i.e. the ratio of the pooled-sample variance to the within-chain variance.
/// Identical chains give exactly 1.
inline double psrf(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("psrf: need at least two chains");
  const std::size_t n = chains[0].size();
  if (n < 10) throw std::invalid_argument("psrf: chains must have length >= 10");
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("psrf: chains must have equal length");
  }
  const std::size_t m = chains.size();
  std::vector<long double> means(m, 0.0L);
  long double within = 0.0L;
  for (std::size_t c = 0; c < m; ++c) {
    for (double v : chains[c]) means[c] += v;
    means[c] /= n;
    long double ss = 0.0L;
    for (double v : chains[c]) ss += (v - means[c]) * (v - means[c]);
    within += ss / n;
  }
  within /= m;
  long double grand = 0.0L;
  for (auto v : means) grand += v;
  grand /= m;
  long double between = 0.0L;
  for (auto v : means) between += (v - grand) * (v - grand);
  between /= m;
  if (!(within > 0.0L)) {
    if (between == 0.0L) return 1.0;
    return std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(std::sqrt((within + between) / within));
}

/// Half the L1 distance between two pmfs on the same support.
inline double tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("tv_distance: support mismatch");
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return std::min(1.0, static_cast<double>(s / 2));
}

/// sup_x |F_n(x) - F(x)| for a sample against a continuous reference CDF.
inline double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("ks_distance: reference cdf outside [0,1]");
    d = std::max({d, std::fabs(static_cast<double>(i + 1) / n - f), std::fabs(f - static_cast<double>(i) / n)});
  }
  return d;
}

/// Empirical pmf of the joint central ranks over the first `records`
/// retained draws (all draws by default).
inline std::vector<double> empirical_pi_pmf(const ChainTrace& trace, const StateSpace& space,
                                            std::optional<std::size_t> records = std::nullopt) {
  const std::size_t n = std::min(records.value_or(trace.size()), trace.size());
  if (n == 0) throw std::invalid_argument("empirical_pi_pmf: empty trace");
  std::vector<double> pmf(space.size(), 0.0);
  for (std::size_t r = 0; r < n; ++r) pmf[space.index(trace.pi(r))] += 1.0;
  for (double& v : pmf) v /= static_cast<double>(n);
  return pmf;
}

/// Running TV distance between the empirical joint pi-pmf of the first t
/// retained draws and `exact`, for t = 1..trace.size().
inline std::vector<double> running_tv(const ChainTrace& trace, const ExactPosteriorPi& exact) {
  std::vector<double> counts(exact.space.size(), 0.0), out(trace.size());
  for (std::size_t r = 0; r < trace.size(); ++r) {
    counts[exact.space.index(trace.pi(r))] += 1.0;
    const double t = static_cast<double>(r + 1);
    long double s = 0.0L;
    for (std::size_t i = 0; i < counts.size(); ++i) s += std::fabs(counts[i] / t - exact.probs[i]);
    out[r] = static_cast<double>(s / 2);
  }
  return out;
}

/// Index (1-based count of draws) at which running_tv first drops below
/// threshold, if it does.
inline std::optional<std::size_t> first_below(std::span<const double> series, double threshold) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i] < threshold) return i + 1;
  }
  return std::nullopt;
}

struct TraceWindow {
  std::size_t begin = 0;
  std::vector<double> values;
};

inline TraceWindow trace_window(std::span<const double> series, std::size_t begin, std::size_t end) {
  if (begin > end || end > series.size()) throw std::out_of_range("trace_window: bad range");
  return {begin, std::vector<double>(series.begin() + static_cast<std::ptrdiff_t>(begin),
                                     series.begin() + static_cast<std::ptrdiff_t>(end))};
}

struct DiagnosticReport {
  PermIndex component{1};
  std::vector<double> acf;
  std::optional<double> psrf;
  std::optional<double> distance;
  std::string distance_kind;       // "tv" or "ks"
  std::string distance_reference;  // what the distance was computed against
  std::optional<TraceWindow> window;

  /// key = value lines; doubles in round-trip precision.
  std::string to_text() const {
    std::ostringstream os;
    auto num = [](double v) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    os << "component = " << component.value() << "\n";
    os << "max_lag = " << (acf.empty() ? 0 : acf.size() - 1) << "\n";
    for (std::size_t l = 0; l < acf.size(); ++l) os << "acf." << l << " = " << num(acf[l]) << "\n";
    if (psrf) os << "psrf = " << num(*psrf) << "\n";
    if (distance) {
      os << "distance." << distance_kind << " = " << num(*distance) << "\n";
      os << "distance.reference = " << distance_reference << "\n";
    }
    if (window) {
      os << "window.begin = " << window->begin << "\n";
      os << "window.length = " << window->values.size() << "\n";
    }
    return os.str();
  }
};

struct ReportOptions {
  PermIndex component{1};
  std::size_t max_lag = 50;
  std::optional<std::pair<std::size_t, std::size_t>> window;
};

/// ACF of theta_component from the first chain, PSRF across chains when there
/// are at least two, and TV to the exact joint pi-posterior when supplied.
inline DiagnosticReport make_report(const std::vector<ChainTrace>& chains, const ReportOptions& opt,
                                    const ExactPosteriorPi* exact = nullptr) {
  if (chains.empty() || chains[0].empty()) throw std::invalid_argument("make_report: no draws");
  DiagnosticReport rep;
  rep.component = opt.component;
  const auto first = chains[0].theta_series(opt.component);
  rep.acf = acf(first, std::min(opt.max_lag, first.size() - 1));
  if (chains.size() >= 2 && first.size() >= 10) {
    std::vector<std::vector<double>> series;
    std::size_t len = first.size();
    for (const auto& c : chains) len = std::min(len, c.size());
    for (const auto& c : chains) {
      auto s = c.theta_series(opt.component);
      s.resize(len);
      series.push_back(std::move(s));
    }
    if (len >= 10) rep.psrf = psrf(series);
  }
  if (exact) {
    std::vector<double> pooled(exact->space.size(), 0.0);
    std::size_t total = 0;
    for (const auto& c : chains) {
      for (std::size_t r = 0; r < c.size(); ++r) pooled[exact->space.index(c.pi(r))] += 1.0;
      total += c.size();
    }
    for (double& v : pooled) v /= static_cast<double>(total);
    rep.distance = tv_distance(pooled, exact->probs);
    rep.distance_kind = "tv";
    rep.distance_reference = "exact joint posterior of the central ranks";
  }
  if (opt.window) rep.window = trace_window(first, opt.window->first, opt.window->second);
  return rep;
}

}  // namespace rankda
