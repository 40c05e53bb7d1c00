#pragma once

// Rao-Blackwellized estimators of central-rank probabilities. Each retained
// theta contributes the exact conditional probability P(. | theta, y) instead
// of an indicator; categories are conditionally independent given theta, so
// joint events factor into per-category masked sums.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankda/model.hpp"
#include "rankda/samplers.hpp"

namespace rankda {

inline constexpr std::size_t kDefaultBatchCount = 30;
inline constexpr std::size_t kMinBatchCount = 10;

/// Per-category subsets A_j of S_p as masks of length p!.
class RankEvent {
public:
  explicit RankEvent(std::vector<std::vector<bool>> masks) : masks_(std::move(masks)) {
    for (std::size_t j = 0; j < masks_.size(); ++j) {
      bool any = false;
      for (bool b : masks_[j]) any = any || b;
      if (!any) throw std::invalid_argument("RankEvent: category " + std::to_string(j) + " has an empty mask");
      if (masks_[j].size() != masks_[0].size()) throw std::invalid_argument("RankEvent: mask lengths differ");
    }
  }

  static RankEvent everything(std::size_t g, std::size_t states) {
    return RankEvent(std::vector<std::vector<bool>>(g, std::vector<bool>(states, true)));
  }
  /// {pi_j = ranks[j] for all j}.
  static RankEvent singleton(const CentralRanks& ranks, std::size_t states) {
    std::vector<std::vector<bool>> m(ranks.size(), std::vector<bool>(states, false));
    for (std::size_t j = 0; j < ranks.size(); ++j) m[j].at(ranks[j].offset()) = true;
    return RankEvent(std::move(m));
  }
  /// {pi_j = rank} for one category, everything else unconstrained.
  static RankEvent marginal(std::size_t g, std::size_t states, std::size_t category, PermIndex rank) {
    auto e = everything(g, states);
    e.masks_.at(category).assign(states, false);
    e.masks_[category].at(rank.offset()) = true;
    return e;
  }

  std::size_t categories() const { return masks_.size(); }
  const std::vector<bool>& mask(std::size_t j) const { return masks_.at(j); }

  /// Category-wise intersection; throws if some category becomes empty.
  RankEvent intersect(const RankEvent& other) const {
    if (other.categories() != categories()) throw std::invalid_argument("RankEvent: category count mismatch");
    auto m = masks_;
    for (std::size_t j = 0; j < m.size(); ++j) {
      for (std::size_t k = 0; k < m[j].size(); ++k) m[j][k] = m[j][k] && other.masks_[j][k];
    }
    return RankEvent(std::move(m));
  }

  bool intersects(const RankEvent& other) const {
    for (std::size_t j = 0; j < masks_.size(); ++j) {
      bool any = false;
      for (std::size_t k = 0; k < masks_[j].size(); ++k) any = any || (masks_[j][k] && other.masks_[j][k]);
      if (!any) return false;
    }
    return true;
  }

private:
  std::vector<std::vector<bool>> masks_;
};

struct EstimateWithSE {
  double value = 0.0;
  double se = 0.0;         // NaN when the trace is too short for kMinBatchCount batches
  std::size_t batches = 0;
};

/// Batch-means standard error of the mean: the series is cut into
/// batch_count equal batches (remainder dropped), and the sample standard
/// deviation of the batch means is divided by sqrt(batch_count).
inline double batch_means_se(std::span<const double> series, std::size_t batch_count = kDefaultBatchCount) {
  if (batch_count < 2) throw std::invalid_argument("batch_means_se: need at least two batches");
  if (series.size() < 2 * batch_count) {
    throw std::invalid_argument("batch_means_se: series of length " + std::to_string(series.size()) +
                                " too short for " + std::to_string(batch_count) + " batches");
  }
  const std::size_t len = series.size() / batch_count;
  std::vector<double> means(batch_count, 0.0);
  for (std::size_t b = 0; b < batch_count; ++b) {
    double s = 0.0;
    for (std::size_t t = b * len; t < (b + 1) * len; ++t) s += series[t];
    means[b] = s / static_cast<double>(len);
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(batch_count);
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  return std::sqrt(ss / static_cast<double>(batch_count - 1)) / std::sqrt(static_cast<double>(batch_count));
}

/// Conditional pmfs gamma_j(theta^(m)) for every record m and category j,
/// computed once and shared by all estimators over the same trace.
class ConditionalTable {
public:
  ConditionalTable(const ChainTrace& trace, const Model& model)
      : records_(trace.size()), categories_(model.categories()), states_(model.states()) {
    if (trace.states() != states_ || trace.categories() != categories_) {
      throw std::invalid_argument("ConditionalTable: trace does not match the model");
    }
    probs_.resize(records_ * categories_ * states_);
    std::vector<double> w(states_);
    for (std::size_t r = 0; r < records_; ++r) {
      const auto lt = log_of(trace.theta(r));
      for (std::size_t j = 0; j < categories_; ++j) {
        gamma_log_weights(lt, j, model, w);
        double hi = -std::numeric_limits<double>::infinity();
        for (double v : w) hi = std::max(hi, v);
        if (!std::isfinite(hi)) throw NumericalError("ConditionalTable: zero conditional mass");
        double s = 0.0;
        for (double& v : w) s += (v = std::exp(v - hi));
        double* out = &probs_[(r * categories_ + j) * states_];
        for (std::size_t k = 0; k < states_; ++k) out[k] = w[k] / s;
      }
    }
  }

  std::size_t records() const { return records_; }
  std::size_t categories() const { return categories_; }
  std::size_t states() const { return states_; }
  std::span<const double> pmf(std::size_t record, std::size_t j) const {
    return {probs_.data() + (record * categories_ + j) * states_, states_};
  }

  /// Per-record prod_j P(pi_j in A_j | theta^(m), y).
  std::vector<double> event_series(const RankEvent& event) const {
    if (event.categories() != categories_) throw std::invalid_argument("event_series: category count mismatch");
    std::vector<double> out(records_, 1.0);
    for (std::size_t r = 0; r < records_; ++r) {
      for (std::size_t j = 0; j < categories_; ++j) {
        const auto& mask = event.mask(j);
        bool all = true;
        double s = 0.0;
        const auto p = pmf(r, j);
        for (std::size_t k = 0; k < states_; ++k) {
          if (mask[k]) s += p[k];
          else all = false;
        }
        if (!all) out[r] *= s;
      }
    }
    return out;
  }

private:
  std::size_t records_;
  std::size_t categories_;
  std::size_t states_;
  std::vector<double> probs_;
};

namespace detail {

inline std::size_t batches_for(std::size_t n, std::size_t requested) {
  const std::size_t b = std::min(requested, n / 2);
  return b >= kMinBatchCount ? b : 0;
}

inline EstimateWithSE mean_with_se(const std::vector<double>& series, std::size_t batch_count) {
  EstimateWithSE e;
  double s = 0.0;
  for (double v : series) s += v;
  e.value = s / static_cast<double>(series.size());
  e.batches = batches_for(series.size(), batch_count);
  e.se = e.batches ? batch_means_se(series, e.batches) : std::numeric_limits<double>::quiet_NaN();
  return e;
}

}  // namespace detail

inline EstimateWithSE rb_joint(const ConditionalTable& table, const RankEvent& event,
                               std::size_t batch_count = kDefaultBatchCount) {
  if (table.records() == 0) throw std::invalid_argument("rb_joint: empty trace");
  return detail::mean_with_se(table.event_series(event), batch_count);
}

inline EstimateWithSE rb_marginal(const ConditionalTable& table, std::size_t category, PermIndex rank,
                                  std::size_t batch_count = kDefaultBatchCount) {
  if (category >= table.categories()) throw std::out_of_range("rb_marginal: category out of range");
  return rb_joint(table, RankEvent::marginal(table.categories(), table.states(), category, rank), batch_count);
}

/// Ratio-of-averages estimate of P(pi in A | pi in B, y). The standard error
/// is the batch-means spread of per-batch ratios.
inline EstimateWithSE rb_conditional(const ConditionalTable& table, const RankEvent& a, const RankEvent& b,
                                     std::size_t batch_count = kDefaultBatchCount) {
  if (table.records() == 0) throw std::invalid_argument("rb_conditional: empty trace");
  const auto den = table.event_series(b);
  std::vector<double> num;
  if (a.intersects(b)) num = table.event_series(a.intersect(b));
  else num.assign(den.size(), 0.0);
  double sn = 0.0, sd = 0.0;
  for (std::size_t r = 0; r < den.size(); ++r) {
    sn += num[r];
    sd += den[r];
  }
  if (!(sd > 0.0)) throw NumericalError("rb_conditional: conditioning event has zero estimated probability");
  EstimateWithSE e;
  e.value = sn / sd;
  e.batches = detail::batches_for(den.size(), batch_count);
  if (!e.batches) {
    e.se = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  const std::size_t len = den.size() / e.batches;
  std::vector<double> ratios(e.batches);
  for (std::size_t bi = 0; bi < e.batches; ++bi) {
    double bn = 0.0, bd = 0.0;
    for (std::size_t t = bi * len; t < (bi + 1) * len; ++t) {
      bn += num[t];
      bd += den[t];
    }
    ratios[bi] = bd > 0.0 ? bn / bd : e.value;
  }
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= static_cast<double>(e.batches);
  double ss = 0.0;
  for (double r : ratios) ss += (r - mean) * (r - mean);
  e.se = std::sqrt(ss / static_cast<double>(e.batches - 1)) / std::sqrt(static_cast<double>(e.batches));
  return e;
}

// Convenience overloads that build the conditional table on the fly.
inline EstimateWithSE rb_marginal(const ChainTrace& trace, std::size_t category, PermIndex rank, const Model& model,
                                  std::size_t batch_count = kDefaultBatchCount) {
  if (trace.empty()) throw std::invalid_argument("rb_marginal: empty trace");
  return rb_marginal(ConditionalTable(trace, model), category, rank, batch_count);
}
inline EstimateWithSE rb_joint(const ChainTrace& trace, const RankEvent& event, const Model& model,
                               std::size_t batch_count = kDefaultBatchCount) {
  if (trace.empty()) throw std::invalid_argument("rb_joint: empty trace");
  return rb_joint(ConditionalTable(trace, model), event, batch_count);
}
inline EstimateWithSE rb_conditional(const ChainTrace& trace, const RankEvent& a, const RankEvent& b,
                                     const Model& model, std::size_t batch_count = kDefaultBatchCount) {
  if (trace.empty()) throw std::invalid_argument("rb_conditional: empty trace");
  return rb_conditional(ConditionalTable(trace, model), a, b, batch_count);
}

}  // namespace rankda
