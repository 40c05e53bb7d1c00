#pragma once

// Two-block Gibbs (data augmentation) sampler and the sandwich algorithm
// for the joint posterior of (theta, pi).
//
//   gibbs:            pi ~ p(pi | theta, y);  theta ~ Dirichlet(m(pi) + a)
//   sandwich_uniform: pi ~ p(pi | theta, y);  sigma ~ Uniform(S_p),
//                     pi' = sigma o pi accepted by Metropolis-Hastings on
//                     p(pi | y); theta ~ Dirichlet(m(pi') + a)
//   sandwich_local:   as above with sigma drawn proportional to a_k on the
//                     non-identity permutations

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rankda/model.hpp"
#include "rankda/random.hpp"

namespace rankda {

enum class Kernel { gibbs, sandwich_uniform, sandwich_local };

inline std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::gibbs: return "gibbs";
    case Kernel::sandwich_uniform: return "sandwich_uniform";
    case Kernel::sandwich_local: return "sandwich_local";
  }
  return "unknown";
}

inline Kernel kernel_from_string(const std::string& s) {
  if (s == "gibbs") return Kernel::gibbs;
  if (s == "sandwich_uniform" || s == "sandwich") return Kernel::sandwich_uniform;
  if (s == "sandwich_local") return Kernel::sandwich_local;
  throw ConfigError("unknown kernel '" + s + "'");
}

struct ChainConfig {
  std::size_t iterations = 1000;
  std::size_t burnin = 0;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  Kernel kernel = Kernel::sandwich_uniform;

  void validate() const {
    if (iterations == 0) throw ConfigError("chain: iterations must be positive");
    if (burnin >= iterations) throw ConfigError("chain: burnin must be smaller than iterations");
    if (thin == 0) throw ConfigError("chain: thin must be at least 1");
  }
  std::size_t retained() const { return (iterations - burnin) / thin; }
};

struct ChainState {
  ThetaVector theta;
  CentralRanks pi;
  std::size_t iteration = 0;
  Rng rng;
  bool accepted = false;
};

/// Optional starting point. A missing theta is drawn from p(theta | pi, y)
/// when pi is given and from the Dirichlet(a) prior otherwise; a missing pi
/// is drawn from its prior.
struct ChainInit {
  std::optional<CentralRanks> pi;
  std::optional<ThetaVector> theta;
};

/// Retained draws of one chain, stored row-major.
class ChainTrace {
public:
  ChainTrace() = default;
  ChainTrace(std::size_t states, std::size_t categories, Kernel kernel)
      : states_(states), categories_(categories), kernel_(kernel) {}

  void reserve(std::size_t n) {
    iterations_.reserve(n);
    theta_.reserve(n * states_);
    pi_.reserve(n * categories_);
    accepted_.reserve(n);
  }

  void push(std::size_t iteration, std::span<const double> theta, const CentralRanks& pi, bool accepted) {
    if (theta.size() != states_ || pi.size() != categories_) {
      throw std::invalid_argument("ChainTrace::push: dimension mismatch");
    }
    iterations_.push_back(iteration);
    theta_.insert(theta_.end(), theta.begin(), theta.end());
    for (PermIndex k : pi) pi_.push_back(static_cast<std::uint32_t>(k.value()));
    accepted_.push_back(accepted ? 1 : 0);
  }

  std::size_t size() const { return iterations_.size(); }
  bool empty() const { return iterations_.empty(); }
  std::size_t states() const { return states_; }
  std::size_t categories() const { return categories_; }
  Kernel kernel() const { return kernel_; }

  std::size_t iteration(std::size_t r) const { return iterations_.at(r); }
  std::span<const double> theta(std::size_t r) const { return {theta_.data() + r * states_, states_}; }
  PermIndex pi(std::size_t r, std::size_t j) const { return PermIndex(pi_[r * categories_ + j]); }
  CentralRanks pi(std::size_t r) const {
    std::vector<PermIndex> v;
    v.reserve(categories_);
    for (std::size_t j = 0; j < categories_; ++j) v.push_back(pi(r, j));
    return CentralRanks(std::move(v));
  }
  bool accepted(std::size_t r) const { return accepted_.at(r) != 0; }

  /// Values of theta_{k} across records.
  std::vector<double> theta_series(PermIndex k) const {
    std::vector<double> out(size());
    for (std::size_t r = 0; r < size(); ++r) out[r] = theta_[r * states_ + k.offset()];
    return out;
  }

  double acceptance_rate() const {
    if (empty()) return 0.0;
    std::size_t a = 0;
    for (auto f : accepted_) a += f;
    return static_cast<double>(a) / static_cast<double>(size());
  }

  friend bool operator==(const ChainTrace&, const ChainTrace&) = default;

private:
  std::size_t states_ = 0;
  std::size_t categories_ = 0;
  Kernel kernel_ = Kernel::gibbs;
  std::vector<std::size_t> iterations_;
  std::vector<double> theta_;
  std::vector<std::uint32_t> pi_;
  std::vector<std::uint8_t> accepted_;
};

/// Unnormalized log gamma_{jr}(theta) for r = 1..p!, written to out. The
/// exponent of theta_k collects n_ij over the unique i with
/// zeta_i = zeta_k o zeta_r.
inline void gamma_log_weights(std::span<const double> log_theta, std::size_t j, const Model& model,
                              std::span<double> out) {
  const auto& tables = model.tables();
  const auto log_prior = model.prior().log_pmf(j);
  const auto observed = model.observed(j);
  for (std::size_t r = 0; r < out.size(); ++r) {
    double w = log_prior[r];
    if (w == -std::numeric_limits<double>::infinity()) {
      out[r] = w;
      continue;
    }
    const std::size_t rinv = tables.inverse_offset(r);
    for (const auto& obs : observed) {
      const double lt = log_theta[tables.compose_offset(obs.offset, rinv)];
      if (lt == -std::numeric_limits<double>::infinity()) {
        w = lt;
        break;
      }
      w += static_cast<double>(obs.count) * lt;
    }
    out[r] = w;
  }
}

inline std::vector<double> log_of(std::span<const double> theta) {
  std::vector<double> out(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) out[k] = std::log(theta[k]);
  return out;
}

/// Normalized conditional pmf P(pi_j = zeta_r | theta, y), r = 1..p!.
inline std::vector<double> gamma_weights(const ThetaVector& theta, std::size_t j, const Model& model) {
  if (theta.size() != model.states()) throw std::invalid_argument("gamma_weights: theta length mismatch");
  if (j >= model.categories()) throw std::out_of_range("gamma_weights: category out of range");
  const auto lt = log_of(theta.values());
  std::vector<double> w(model.states());
  gamma_log_weights(lt, j, model, w);
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : w) hi = std::max(hi, v);
  if (!std::isfinite(hi)) throw NumericalError("gamma_weights: every ranking has zero weight");
  double s = 0.0;
  for (double& v : w) s += (v = std::exp(v - hi));
  for (double& v : w) v /= s;
  return w;
}

/// pi_j ~ multinomial(1; gamma_j(theta)) independently over categories.
inline CentralRanks draw_pi(const ThetaVector& theta, const Model& model, Rng& rng) {
  const auto lt = log_of(theta.values());
  std::vector<double> w(model.states());
  std::vector<PermIndex> pi;
  pi.reserve(model.categories());
  for (std::size_t j = 0; j < model.categories(); ++j) {
    gamma_log_weights(lt, j, model, w);
    pi.push_back(PermIndex::from_offset(rng.categorical_log(w)));
  }
  return CentralRanks(std::move(pi));
}

/// theta ~ Dirichlet(m(pi) + a).
inline ThetaVector draw_theta(const CentralRanks& pi, const Model& model, Rng& rng) {
  const auto m = m_counts(pi, model);
  std::vector<double> shapes(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) shapes[k] = static_cast<double>(m[k]) + model.hyp().a[k];
  return ThetaVector(rng.dirichlet(shapes));
}

/// Proposal weights of the local sandwich move: proportional to a_k with the
/// identity excluded.
inline std::vector<double> local_proposal_weights(const Model& model) {
  if (model.tables().items() < 2) throw std::invalid_argument("local sandwich move needs p >= 2");
  std::vector<double> w(model.hyp().a);
  w[0] = 0.0;
  return w;
}

/// pi' = sigma o pi (componentwise).
inline CentralRanks act(std::size_t sigma_offset, const CentralRanks& pi, const GroupTables& tables) {
  std::vector<PermIndex> out;
  out.reserve(pi.size());
  for (PermIndex k : pi) out.push_back(PermIndex::from_offset(tables.compose_offset(sigma_offset, k.offset())));
  return CentralRanks(std::move(out));
}

/// Metropolis-Hastings log acceptance ratio of moving pi -> sigma o pi.
inline double sandwich_log_ratio(std::size_t sigma_offset, const CentralRanks& pi, const Model& model) {
  if (sigma_offset == 0) return 0.0;
  return log_post_pi(act(sigma_offset, pi, model.tables()), model) - log_post_pi(pi, model);
}

namespace detail {

inline CentralRanks mh_group_move(std::size_t sigma, CentralRanks pi, const Model& model, Rng& rng,
                                  bool& accepted) {
  if (sigma == 0) {
    accepted = true;
    return pi;
  }
  CentralRanks proposal = act(sigma, pi, model.tables());
  const double log_ratio = log_post_pi(proposal, model) - log_post_pi(pi, model);
  accepted = log_ratio >= 0.0 || std::log(rng.uniform_open()) < log_ratio;
  return accepted ? proposal : pi;
}

}  // namespace detail

inline ChainState gibbs_step(ChainState state, const Model& model) {
  state.pi = draw_pi(state.theta, model, state.rng);
  state.theta = draw_theta(state.pi, model, state.rng);
  state.accepted = false;
  ++state.iteration;
  return state;
}

inline ChainState sandwich_step(ChainState state, const Model& model) {
  CentralRanks pi = draw_pi(state.theta, model, state.rng);
  const std::size_t sigma = state.rng.below(model.states());
  state.pi = detail::mh_group_move(sigma, std::move(pi), model, state.rng, state.accepted);
  state.theta = draw_theta(state.pi, model, state.rng);
  ++state.iteration;
  return state;
}

/// Local variant. Because |tau| = |tau^{-1}|, the proposal is symmetric and
/// no Hastings correction is needed.
inline ChainState sandwich_local_step(ChainState state, const Model& model, std::span<const double> weights) {
  CentralRanks pi = draw_pi(state.theta, model, state.rng);
  const std::size_t tau = state.rng.categorical(weights);
  state.pi = detail::mh_group_move(tau, std::move(pi), model, state.rng, state.accepted);
  state.theta = draw_theta(state.pi, model, state.rng);
  ++state.iteration;
  return state;
}

inline ChainState sandwich_local_step(ChainState state, const Model& model) {
  const auto w = local_proposal_weights(model);
  return sandwich_local_step(std::move(state), model, w);
}

inline ChainState initial_state(const Model& model, const ChainInit& init, Rng rng) {
  CentralRanks pi;
  if (init.pi) {
    check_ranks(*init.pi, model.categories(), model.states());
    pi = *init.pi;
  } else {
    std::vector<PermIndex> v;
    for (std::size_t j = 0; j < model.categories(); ++j) {
      v.push_back(PermIndex::from_offset(rng.categorical(model.prior().pmf(j))));
    }
    pi = CentralRanks(std::move(v));
  }
  std::optional<ThetaVector> theta = init.theta;
  if (theta && theta->size() != model.states()) throw std::invalid_argument("init: theta length mismatch");
  if (!theta) {
    theta = init.pi ? draw_theta(pi, model, rng) : ThetaVector(rng.dirichlet(model.hyp().a));
  }
  return ChainState{std::move(*theta), std::move(pi), 0, rng, false};
}

/// Runs one chain on stream `stream` of config.seed and keeps iterations
/// m > burnin with (m - burnin) divisible by thin.
inline ChainTrace run_chain(const ChainConfig& config, const Model& model, const ChainInit& init = {},
                            std::uint64_t stream = 0) {
  config.validate();
  ChainState state = initial_state(model, init, Rng(config.seed, stream));
  std::vector<double> local;
  if (config.kernel == Kernel::sandwich_local) local = local_proposal_weights(model);
  ChainTrace trace(model.states(), model.categories(), config.kernel);
  trace.reserve(config.retained());
  for (std::size_t m = 1; m <= config.iterations; ++m) {
    switch (config.kernel) {
      case Kernel::gibbs: state = gibbs_step(std::move(state), model); break;
      case Kernel::sandwich_uniform: state = sandwich_step(std::move(state), model); break;
      case Kernel::sandwich_local: state = sandwich_local_step(std::move(state), model, local); break;
    }
    if (m > config.burnin && (m - config.burnin) % config.thin == 0) {
      trace.push(m, state.theta.values(), state.pi, state.accepted);
    }
  }
  return trace;
}

/// Independent chains on streams 0..n-1, run concurrently. inits may be
/// empty or hold one entry per chain.
inline std::vector<ChainTrace> run_chains(const ChainConfig& config, const Model& model, std::size_t n,
                                          const std::vector<ChainInit>& inits = {}) {
  if (n == 0) throw ConfigError("run_chains: need at least one chain");
  if (!inits.empty() && inits.size() != n) throw ConfigError("run_chains: one init per chain required");
  config.validate();
  std::vector<ChainTrace> traces(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < n; start += hw) {
    workers.clear();
    for (std::size_t c = start; c < std::min(n, start + hw); ++c) {
      workers.emplace_back([&, c] {
        try {
          traces[c] = run_chain(config, model, inits.empty() ? ChainInit{} : inits[c], c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return traces;
}

}  // namespace rankda
