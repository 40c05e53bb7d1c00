#pragma once

// Data counts, hyperparameters, priors and the (unnormalized) posteriors of
// the rank model y_ij = sigma_ij o pi_j with sigma_ij ~ theta i.i.d.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankda/permutation.hpp"
#include "rankda/random.hpp"
#include "rankda/special_functions.hpp"

namespace rankda {

/// Count matrix n[j][i]: number of times ranking zeta_i was observed in
/// category j. Categories are zero-based; rankings are addressed by PermIndex.
class RankCounts {
public:
  RankCounts(int p, std::vector<std::vector<std::int64_t>> counts) : p_(p) {
    states_ = static_cast<std::size_t>(factorial(p));
    g_ = counts.size();
    n_.reserve(g_ * states_);
    totals_.reserve(g_);
    for (std::size_t j = 0; j < g_; ++j) {
      if (counts[j].size() != states_) {
        throw std::invalid_argument("RankCounts: category " + std::to_string(j) + " has " +
                                    std::to_string(counts[j].size()) + " entries, expected " +
                                    std::to_string(states_));
      }
      std::int64_t b = 0;
      for (std::int64_t c : counts[j]) {
        if (c < 0) throw std::invalid_argument("RankCounts: negative count");
        n_.push_back(c);
        b += c;
      }
      totals_.push_back(b);
      total_ += b;
    }
  }

  static RankCounts zeros(int p, std::size_t g) {
    return RankCounts(p, std::vector<std::vector<std::int64_t>>(
                             g, std::vector<std::int64_t>(static_cast<std::size_t>(factorial(p)), 0)));
  }

  int items() const { return p_; }
  std::size_t categories() const { return g_; }
  std::size_t states() const { return states_; }

  std::int64_t count(std::size_t j, PermIndex i) const { return n_.at(j * states_ + i.offset()); }
  /// Counts of category j, position k holding the count of zeta_{k+1}.
  std::span<const std::int64_t> row(std::size_t j) const {
    return {n_.data() + j * states_, states_};
  }
  std::int64_t category_total(std::size_t j) const { return totals_.at(j); }
  std::int64_t total() const { return total_; }

  std::vector<std::vector<std::int64_t>> nested() const {
    std::vector<std::vector<std::int64_t>> out(g_);
    for (std::size_t j = 0; j < g_; ++j) out[j].assign(row(j).begin(), row(j).end());
    return out;
  }

  friend bool operator==(const RankCounts&, const RankCounts&) = default;

private:
  int p_;
  std::size_t g_ = 0;
  std::size_t states_ = 0;
  std::vector<std::int64_t> n_;
  std::vector<std::int64_t> totals_;
  std::int64_t total_ = 0;
};

/// Dirichlet hyperparameters a_k = scale * exp(lambda * |zeta_k|), where
/// |zeta_k| is the cycle count. The scale defaults to 1.
struct HyperParams {
  double lambda = 0.0;
  double scale = 1.0;
  std::vector<double> a;
  double a0 = 0.0;

  static HyperParams from_lambda(double lambda, const GroupTables& tables, double scale = 1.0) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("HyperParams: lambda must be finite and nonnegative");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      throw std::invalid_argument("HyperParams: scale must be positive");
    }
    HyperParams h;
    h.lambda = lambda;
    h.scale = scale;
    h.a.resize(tables.size());
    for (std::size_t k = 0; k < tables.size(); ++k) {
      h.a[k] = scale * std::exp(lambda * tables.cycles_offset(k));
      h.a0 += h.a[k];
    }
    return h;
  }
};

/// Independent per-category priors on pi_j, each a pmf over the p! rankings.
class PriorPi {
public:
  explicit PriorPi(std::vector<std::vector<double>> pmfs) : pmf_(std::move(pmfs)) {
    log_pmf_.resize(pmf_.size());
    for (std::size_t j = 0; j < pmf_.size(); ++j) {
      double s = 0.0;
      for (double v : pmf_[j]) {
        if (!(v >= 0.0)) throw std::invalid_argument("PriorPi: negative probability");
        s += v;
      }
      if (std::fabs(s - 1.0) > 1e-12) {
        throw std::invalid_argument("PriorPi: category " + std::to_string(j) + " sums to " +
                                    std::to_string(s));
      }
      if (j > 0 && pmf_[j].size() != pmf_[0].size()) {
        throw std::invalid_argument("PriorPi: inconsistent pmf lengths");
      }
      log_pmf_[j].reserve(pmf_[j].size());
      for (double v : pmf_[j]) log_pmf_[j].push_back(std::log(v));
    }
  }

  static PriorPi uniform(std::size_t g, std::size_t states) {
    return PriorPi(std::vector<std::vector<double>>(g, std::vector<double>(states, 1.0 / states)));
  }

  static PriorPi point_mass(std::size_t g, std::size_t states, std::size_t category, PermIndex at) {
    auto pmfs = std::vector<std::vector<double>>(g, std::vector<double>(states, 1.0 / states));
    pmfs.at(category).assign(states, 0.0);
    pmfs[category].at(at.offset()) = 1.0;
    return PriorPi(std::move(pmfs));
  }

  std::size_t categories() const { return pmf_.size(); }
  std::size_t states() const { return pmf_.empty() ? 0 : pmf_[0].size(); }
  std::span<const double> pmf(std::size_t j) const { return pmf_.at(j); }
  std::span<const double> log_pmf(std::size_t j) const { return log_pmf_.at(j); }
  double log_prob(std::size_t j, PermIndex k) const { return log_pmf_.at(j).at(k.offset()); }

private:
  std::vector<std::vector<double>> pmf_;
  std::vector<std::vector<double>> log_pmf_;
};

/// A point on the simplex S_{p!}; position k holds P(sigma = zeta_{k+1}).
class ThetaVector {
public:
  explicit ThetaVector(std::vector<double> theta) : theta_(std::move(theta)) {
    double s = 0.0;
    for (double v : theta_) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("ThetaVector: entry outside [0,1]");
      s += v;
    }
    const double tol = 1e-12 + 4.0 * std::numeric_limits<double>::epsilon() * theta_.size();
    if (std::fabs(s - 1.0) > tol) {
      throw std::invalid_argument("ThetaVector: entries sum to " + std::to_string(s));
    }
  }

  static ThetaVector uniform(std::size_t states) {
    return ThetaVector(std::vector<double>(states, 1.0 / states));
  }
  /// theta proportional to exp(lambda * |zeta_k|).
  static ThetaVector exponential_family(double lambda, const GroupTables& tables) {
    std::vector<double> w(tables.size());
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) s += (w[k] = std::exp(lambda * tables.cycles_offset(k)));
    for (double& v : w) v /= s;
    return ThetaVector(std::move(w));
  }

  std::size_t size() const { return theta_.size(); }
  double operator[](PermIndex k) const { return theta_.at(k.offset()); }
  std::span<const double> values() const { return theta_; }

  friend bool operator==(const ThetaVector&, const ThetaVector&) = default;

private:
  std::vector<double> theta_;
};

/// Central ranks (pi_1, ..., pi_g), one PermIndex per category.
class CentralRanks {
public:
  CentralRanks() = default;
  explicit CentralRanks(std::vector<PermIndex> ranks) : ranks_(std::move(ranks)) {}

  std::size_t size() const { return ranks_.size(); }
  PermIndex operator[](std::size_t j) const { return ranks_[j]; }
  PermIndex& operator[](std::size_t j) { return ranks_[j]; }
  auto begin() const { return ranks_.begin(); }
  auto end() const { return ranks_.end(); }
  const std::vector<PermIndex>& values() const { return ranks_; }

  friend bool operator==(const CentralRanks&, const CentralRanks&) = default;

private:
  std::vector<PermIndex> ranks_;
};

/// All inputs of the posterior: group tables, data, hyperparameters and the
/// prior on the central ranks. Immutable; shareable across threads.
class Model {
public:
  struct Observed {
    std::size_t offset;  // ranking zeta_{offset+1}
    std::int64_t count;
  };

  Model(std::shared_ptr<const GroupTables> tables, RankCounts counts, HyperParams hyp, PriorPi prior)
      : tables_(std::move(tables)), counts_(std::move(counts)), hyp_(std::move(hyp)), prior_(std::move(prior)) {
    if (!tables_) throw std::invalid_argument("Model: null tables");
    const std::size_t n = tables_->size();
    if (counts_.items() != tables_->items()) throw std::invalid_argument("Model: item count mismatch");
    if (hyp_.a.size() != n) throw std::invalid_argument("Model: hyperparameter length mismatch");
    if (prior_.categories() != counts_.categories() || prior_.states() != n) {
      throw std::invalid_argument("Model: prior dimension mismatch");
    }
    for (double a : hyp_.a) {
      if (!(a > 0.0)) throw std::invalid_argument("Model: hyperparameters must be positive");
    }
    observed_.resize(counts_.categories());
    for (std::size_t j = 0; j < counts_.categories(); ++j) {
      const auto row = counts_.row(j);
      for (std::size_t i = 0; i < n; ++i) {
        if (row[i] > 0) observed_[j].push_back({i, row[i]});
      }
    }
  }

  const GroupTables& tables() const { return *tables_; }
  std::shared_ptr<const GroupTables> shared_tables() const { return tables_; }
  const RankCounts& counts() const { return counts_; }
  const HyperParams& hyp() const { return hyp_; }
  const PriorPi& prior() const { return prior_; }
  std::size_t categories() const { return counts_.categories(); }
  std::size_t states() const { return tables_->size(); }

  /// Nonzero counts of category j.
  std::span<const Observed> observed(std::size_t j) const { return observed_[j]; }

  Model with_hyper(HyperParams hyp) const { return Model(tables_, counts_, std::move(hyp), prior_); }

private:
  std::shared_ptr<const GroupTables> tables_;
  RankCounts counts_;
  HyperParams hyp_;
  PriorPi prior_;
  std::vector<std::vector<Observed>> observed_;
};

inline void check_ranks(const CentralRanks& pi, std::size_t g, std::size_t states) {
  if (pi.size() != g) throw std::invalid_argument("central ranks: expected one rank per category");
  for (PermIndex k : pi) {
    if (k.value() < 1 || k.value() > states) throw std::out_of_range("central ranks: index out of range");
  }
}

/// m_k(pi) = sum_j sum_i n_ij I(zeta_i o pi_j^{-1} = zeta_k); position k-1 holds m_k.
inline std::vector<std::int64_t> m_counts(const CentralRanks& pi, const RankCounts& counts,
                                          const GroupTables& tables) {
  if (counts.items() != tables.items()) throw std::invalid_argument("m_counts: item count mismatch");
  check_ranks(pi, counts.categories(), tables.size());
  std::vector<std::int64_t> m(tables.size(), 0);
  for (std::size_t j = 0; j < counts.categories(); ++j) {
    const std::size_t pinv = tables.inverse_offset(pi[j].offset());
    const auto row = counts.row(j);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] != 0) m[tables.compose_offset(i, pinv)] += row[i];
    }
  }
  return m;
}

inline std::vector<std::int64_t> m_counts(const CentralRanks& pi, const Model& model) {
  check_ranks(pi, model.categories(), model.states());
  const auto& tables = model.tables();
  std::vector<std::int64_t> m(model.states(), 0);
  for (std::size_t j = 0; j < model.categories(); ++j) {
    const std::size_t pinv = tables.inverse_offset(pi[j].offset());
    for (const auto& obs : model.observed(j)) m[tables.compose_offset(obs.offset, pinv)] += obs.count;
  }
  return m;
}

/// log p(y | theta, pi) = sum_k m_k(pi) log theta_k. Returns -inf when some
/// theta_k = 0 carries a positive count.
inline double log_likelihood(const ThetaVector& theta, const CentralRanks& pi, const RankCounts& counts,
                             const GroupTables& tables) {
  if (theta.size() != tables.size()) throw std::invalid_argument("log_likelihood: theta length mismatch");
  const auto m = m_counts(pi, counts, tables);
  const auto th = theta.values();
  double ll = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m[k] == 0) continue;
    if (th[k] == 0.0) return -std::numeric_limits<double>::infinity();
    ll += static_cast<double>(m[k]) * std::log(th[k]);
  }
  return ll;
}

/// log p(pi) + sum_k log Gamma(m_k(pi) + a_k): the marginal posterior of the
/// central ranks up to an additive constant. -inf where the prior vanishes.
inline double log_post_pi(const CentralRanks& pi, const Model& model) {
  double lp = 0.0;
  for (std::size_t j = 0; j < model.categories(); ++j) lp += model.prior().log_prob(j, pi[j]);
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  const auto m = m_counts(pi, model);
  const auto& a = model.hyp().a;
  for (std::size_t k = 0; k < m.size(); ++k) lp += log_gamma(static_cast<double>(m[k]) + a[k]);
  return lp;
}

inline double log_post_pi(const CentralRanks& pi, const RankCounts& counts, const HyperParams& hyp,
                          const PriorPi& prior, std::shared_ptr<const GroupTables> tables) {
  return log_post_pi(pi, Model(std::move(tables), counts, hyp, prior));
}

/// Draws b_j observations per category from y = sigma o pi_j, sigma ~ theta.
inline RankCounts simulate_data(const CentralRanks& pi_true, const ThetaVector& theta_true,
                                std::span<const std::int64_t> b, std::uint64_t seed,
                                const GroupTables& tables) {
  if (b.size() != pi_true.size()) throw std::invalid_argument("simulate_data: b and pi length mismatch");
  if (theta_true.size() != tables.size()) throw std::invalid_argument("simulate_data: theta length mismatch");
  check_ranks(pi_true, pi_true.size(), tables.size());
  Rng rng(seed, 0);
  std::vector<std::vector<std::int64_t>> n(b.size(), std::vector<std::int64_t>(tables.size(), 0));
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j] < 0) throw std::invalid_argument("simulate_data: negative sample size");
    for (std::int64_t t = 0; t < b[j]; ++t) {
      const std::size_t sigma = rng.categorical(theta_true.values());
      ++n[j][tables.compose_offset(sigma, pi_true[j].offset())];
    }
  }
  return RankCounts(tables.items(), std::move(n));
}

}  // namespace rankda
