#pragma once

// Adaptive Gauss-Kronrod (7/15) quadrature for integrands that are only
// representable in log space, such as x^400 (1-x)^300 times a mixture weight.
// The integrand is supplied as log f; it is exponentiated after subtracting
// its maximum, and the result is returned as a log value.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "rankda/error.hpp"

namespace rankda {

struct QuadratureOptions {
  double rel_tol = 1e-13;
  std::size_t initial_panels = 16;
  std::size_t max_panels = 20000;
  std::size_t scan_points = 400;
};

struct LogIntegral {
  double log_value = -std::numeric_limits<double>::infinity();
  double rel_error = 0.0;  // estimated
  std::size_t panels = 0;
  double value() const { return std::exp(log_value); }
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for nodes 1, 3, 5, 7 of the Kronrod set.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double lo, hi, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

inline Panel gauss_kronrod(const std::function<double(double)>& f, double lo, double hi) {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  const double fc = f(mid);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  double abs_sum = std::fabs(kronrod);
  for (std::size_t i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    const double f1 = f(mid - dx);
    const double f2 = f(mid + dx);
    kronrod += kKronrodWeights[i] * (f1 + f2);
    abs_sum += kKronrodWeights[i] * (std::fabs(f1) + std::fabs(f2));
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * (f1 + f2);
  }
  const double value = kronrod * half;
  double err = std::fabs((kronrod - gauss) * half);
  err = std::max(err, 50.0 * std::numeric_limits<double>::epsilon() * abs_sum * std::fabs(half));
  return {lo, hi, value, err};
}

}  // namespace detail

/// log of the integral of exp(log_f) over (lo, hi). log_f may return -inf.
/// Integrable singularities are resolved down to the spacing of doubles near
/// the endpoint, so a singularity at 1 loses the mass within about 1e-16 of it.
/// Throws NumericalError if the tolerance is not met within max_panels.
inline LogIntegral integrate_log(const std::function<double(double)>& log_f, double lo, double hi,
                                 const QuadratureOptions& opt = {}) {
  if (!(hi > lo)) throw std::invalid_argument("integrate_log: empty interval");
  // Locate the peak of log f to fix the scaling.
  double peak = -std::numeric_limits<double>::infinity();
  double peak_x = 0.5 * (lo + hi);
  const double step = (hi - lo) / static_cast<double>(opt.scan_points + 1);
  for (std::size_t i = 1; i <= opt.scan_points; ++i) {
    const double x = lo + step * static_cast<double>(i);
    const double v = log_f(x);
    if (v > peak) {
      peak = v;
      peak_x = x;
    }
  }
  if (peak == -std::numeric_limits<double>::infinity()) return {};
  {
    // Golden-section refinement of the peak within the neighbouring cells.
    double a = std::max(lo, peak_x - step), b = std::min(hi, peak_x + step);
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = log_f(c), fd = log_f(d);
    for (int it = 0; it < 60; ++it) {
      if (fc > fd) {
        b = d; d = c; fd = fc; c = b - r * (b - a); fc = log_f(c);
      } else {
        a = c; c = d; fc = fd; d = a + r * (b - a); fd = log_f(d);
      }
    }
    const double xm = 0.5 * (a + b);
    const double vm = log_f(xm);
    if (vm > peak && std::isfinite(vm)) {
      peak = vm;
      peak_x = xm;
    }
  }
  const double shift = peak;
  auto f = [&](double x) {
    // Nodes of panels squeezed against an endpoint can round onto it.
    if (!(x > lo && x < hi)) return 0.0;
    const double v = log_f(x);
    return v == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(v - shift);
  };

  std::vector<double> cuts;
  for (std::size_t i = 0; i <= opt.initial_panels; ++i) {
    cuts.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(opt.initial_panels));
  }
  const double min_gap = 1e-6 * (hi - lo) / static_cast<double>(opt.initial_panels);
  if (peak_x - lo > min_gap && hi - peak_x > min_gap) cuts.push_back(peak_x);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<detail::Panel> panels;
  double total = 0.0, error = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    auto p = detail::gauss_kronrod(f, cuts[i], cuts[i + 1]);
    total += p.value;
    error += p.error;
    panels.push(p);
  }
  while (error > opt.rel_tol * std::fabs(total)) {
    if (panels.size() >= opt.max_panels) {
      throw NumericalError("integrate_log: tolerance " + std::to_string(opt.rel_tol) +
                           " not met (estimated relative error " + std::to_string(error / std::fabs(total)) + ")");
    }
    const auto worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const auto left = detail::gauss_kronrod(f, worst.lo, mid);
    const auto right = detail::gauss_kronrod(f, mid, worst.hi);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum to shed the drift of the running updates.
  total = 0.0;
  error = 0.0;
  const std::size_t count = panels.size();
  while (!panels.empty()) {
    total += panels.top().value;
    error += panels.top().error;
    panels.pop();
  }
  if (!(total > 0.0)) return {-std::numeric_limits<double>::infinity(), 0.0, count};
  return {shift + std::log(total), error / total, count};
}

}  // namespace rankda
