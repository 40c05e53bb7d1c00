#pragma once

// Exact algebra on the symmetric group S_p.
//
// Conventions used throughout the library:
//   * A Permutation is stored in one-line notation: images()[j-1] is the
//     image of item j, values are 1-based.
//   * PermIndex is the 1-based position of a permutation in the
//     lexicographic listing of all one-line words, so index 1 is the
//     identity and index p! is the full reversal.
//   * Composition is (tau o sigma)(j) = tau(sigma(j)).
//
// Zero-based "offsets" (index - 1) appear only in the *_offset accessors of
// GroupTables, which exist for inner loops of the samplers.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankda/error.hpp"

namespace rankda {

/// Largest p for which unrank/rank work (20! fits in 64 bits).
inline constexpr int kMaxWordLength = 20;
/// Default cap on p for GroupTables (8! = 40320 states).
inline constexpr int kDefaultMaxItems = 8;
/// Above this p the composition table is not materialized.
inline constexpr int kMaxTabulatedItems = 6;

inline std::uint64_t factorial(int p) {
  if (p < 0 || p > kMaxWordLength) {
    throw std::out_of_range("factorial: p out of range: " + std::to_string(p));
  }
  std::uint64_t f = 1;
  for (int i = 2; i <= p; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

/// 1-based lexicographic position of a permutation.
class PermIndex {
public:
  constexpr PermIndex() = default;
  constexpr explicit PermIndex(std::size_t value) : value_(value) {}

  constexpr std::size_t value() const { return value_; }
  constexpr std::size_t offset() const { return value_ - 1; }
  static constexpr PermIndex from_offset(std::size_t offset) { return PermIndex(offset + 1); }

  friend constexpr bool operator==(PermIndex, PermIndex) = default;
  friend constexpr auto operator<=>(PermIndex, PermIndex) = default;

private:
  std::size_t value_ = 1;
};

class Permutation {
public:
  /// Throws std::invalid_argument unless images is a bijection of {1..p}.
  explicit Permutation(std::vector<int> images) : images_(std::move(images)) {
    validate();
  }

  static Permutation identity(int p) {
    std::vector<int> w(static_cast<std::size_t>(p));
    std::iota(w.begin(), w.end(), 1);
    return Permutation(std::move(w));
  }

  int size() const { return static_cast<int>(images_.size()); }
  /// Image of item j (1-based).
  int operator()(int j) const { return images_[static_cast<std::size_t>(j - 1)]; }
  const std::vector<int>& images() const { return images_; }

  bool is_identity() const {
    for (std::size_t j = 0; j < images_.size(); ++j) {
      if (images_[j] != static_cast<int>(j + 1)) return false;
    }
    return true;
  }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t j = 0; j < images_.size(); ++j) {
      if (j) s += ',';
      s += std::to_string(images_[j]);
    }
    return s + "]";
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

private:
  void validate() const {
    const auto p = images_.size();
    if (p == 0) throw std::invalid_argument("permutation must have at least one item");
    std::vector<bool> seen(p, false);
    for (int v : images_) {
      if (v < 1 || static_cast<std::size_t>(v) > p || seen[static_cast<std::size_t>(v - 1)]) {
        throw std::invalid_argument("not a bijection of {1..p}: value " + std::to_string(v));
      }
      seen[static_cast<std::size_t>(v - 1)] = true;
    }
  }

  std::vector<int> images_;
};

/// k-th permutation (1-based) of {1..p} in lexicographic order, via the
/// factorial number system.
inline Permutation unrank(PermIndex k, int p) {
  if (p < 1 || p > kMaxWordLength) {
    throw std::out_of_range("unrank: p out of range: " + std::to_string(p));
  }
  const std::uint64_t total = factorial(p);
  if (k.value() < 1 || k.value() > total) {
    throw std::out_of_range("unrank: index " + std::to_string(k.value()) + " not in [1, " +
                            std::to_string(total) + "]");
  }
  std::vector<int> pool(static_cast<std::size_t>(p));
  std::iota(pool.begin(), pool.end(), 1);
  std::vector<int> word;
  word.reserve(pool.size());
  std::uint64_t rest = k.offset();
  for (int i = p - 1; i >= 0; --i) {
    const std::uint64_t radix = factorial(i);
    const auto digit = static_cast<std::size_t>(rest / radix);
    rest %= radix;
    word.push_back(pool[digit]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(digit));
  }
  return Permutation(std::move(word));
}

/// Inverse of unrank.
inline PermIndex rank(const Permutation& sigma) {
  const auto& w = sigma.images();
  const int p = sigma.size();
  if (p > kMaxWordLength) throw std::out_of_range("rank: word too long");
  std::uint64_t offset = 0;
  for (int i = 0; i < p; ++i) {
    int smaller_after = 0;
    for (int j = i + 1; j < p; ++j) {
      if (w[static_cast<std::size_t>(j)] < w[static_cast<std::size_t>(i)]) ++smaller_after;
    }
    offset += static_cast<std::uint64_t>(smaller_after) * factorial(p - 1 - i);
  }
  return PermIndex::from_offset(offset);
}

/// (tau o sigma)(j) = tau(sigma(j)).
inline Permutation compose(const Permutation& tau, const Permutation& sigma) {
  if (tau.size() != sigma.size()) throw std::invalid_argument("compose: size mismatch");
  std::vector<int> w(static_cast<std::size_t>(sigma.size()));
  for (int j = 1; j <= sigma.size(); ++j) w[static_cast<std::size_t>(j - 1)] = tau(sigma(j));
  return Permutation(std::move(w));
}

inline Permutation inverse(const Permutation& sigma) {
  std::vector<int> w(static_cast<std::size_t>(sigma.size()));
  for (int j = 1; j <= sigma.size(); ++j) w[static_cast<std::size_t>(sigma(j) - 1)] = j;
  return Permutation(std::move(w));
}

/// Number of disjoint cycles, fixed points counted as 1-cycles.
inline int cycle_count(const Permutation& sigma) {
  const int p = sigma.size();
  std::vector<bool> seen(static_cast<std::size_t>(p), false);
  int cycles = 0;
  for (int start = 1; start <= p; ++start) {
    if (seen[static_cast<std::size_t>(start - 1)]) continue;
    ++cycles;
    for (int j = start; !seen[static_cast<std::size_t>(j - 1)]; j = sigma(j)) {
      seen[static_cast<std::size_t>(j - 1)] = true;
    }
  }
  return cycles;
}

/// Cayley distance: p minus the number of cycles of tau o alpha^{-1}.
inline int cayley_distance(const Permutation& tau, const Permutation& alpha) {
  if (tau.size() != alpha.size()) throw std::invalid_argument("cayley_distance: size mismatch");
  return tau.size() - cycle_count(compose(tau, inverse(alpha)));
}

/// Precomputed group structure of S_p indexed by PermIndex. Immutable after
/// construction. For p <= kMaxTabulatedItems the full composition table is
/// stored; for larger p compositions are evaluated from the stored words.
class GroupTables {
public:
  explicit GroupTables(int p, int max_items = kDefaultMaxItems) : p_(p) {
    if (p < 1) throw std::invalid_argument("GroupTables: p must be positive");
    if (p > max_items) {
      throw ConfigError("GroupTables: p = " + std::to_string(p) + " exceeds the table limit " +
                        std::to_string(max_items));
    }
    n_ = static_cast<std::size_t>(factorial(p));
    const auto pp = static_cast<std::size_t>(p);
    words_.resize(n_ * pp);
    inverse_.resize(n_);
    cycles_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const Permutation w = unrank(PermIndex::from_offset(k), p);
      for (std::size_t j = 0; j < pp; ++j) words_[k * pp + j] = static_cast<std::uint8_t>(w.images()[j]);
      inverse_[k] = rank(rankda::inverse(w)).offset();
      cycles_[k] = cycle_count(w);
    }
    if (p <= kMaxTabulatedItems) {
      compose_.resize(n_ * n_);
      for (std::size_t k = 0; k < n_; ++k) {
        for (std::size_t r = 0; r < n_; ++r) compose_[k * n_ + r] = static_cast<std::uint32_t>(compose_words(k, r));
      }
    }
  }

  int items() const { return p_; }
  /// Number of permutations, p!.
  std::size_t size() const { return n_; }
  bool tabulated() const { return !compose_.empty(); }

  Permutation word(PermIndex k) const {
    check(k);
    const auto pp = static_cast<std::size_t>(p_);
    std::vector<int> w(pp);
    for (std::size_t j = 0; j < pp; ++j) w[j] = words_[k.offset() * pp + j];
    return Permutation(std::move(w));
  }

  PermIndex compose(PermIndex tau, PermIndex sigma) const {
    check(tau);
    check(sigma);
    return PermIndex::from_offset(compose_offset(tau.offset(), sigma.offset()));
  }
  PermIndex inverse(PermIndex k) const {
    check(k);
    return PermIndex::from_offset(inverse_[k.offset()]);
  }
  int cycles(PermIndex k) const {
    check(k);
    return cycles_[k.offset()];
  }

  // Zero-based accessors for inner loops; no range checks.
  std::size_t compose_offset(std::size_t tau, std::size_t sigma) const {
    return tabulated() ? compose_[tau * n_ + sigma] : compose_words(tau, sigma);
  }
  std::size_t inverse_offset(std::size_t k) const { return inverse_[k]; }
  int cycles_offset(std::size_t k) const { return cycles_[k]; }

private:
  void check(PermIndex k) const {
    if (k.value() < 1 || k.value() > n_) {
      throw std::out_of_range("PermIndex " + std::to_string(k.value()) + " not in [1, " +
                              std::to_string(n_) + "]");
    }
  }

  std::size_t compose_words(std::size_t tau, std::size_t sigma) const {
    const auto pp = static_cast<std::size_t>(p_);
    const std::uint8_t* t = &words_[tau * pp];
    const std::uint8_t* s = &words_[sigma * pp];
    // Lehmer code of the composed word, computed in place.
    std::uint8_t w[kMaxWordLength];
    for (std::size_t j = 0; j < pp; ++j) w[j] = t[s[j] - 1];
    std::size_t offset = 0;
    for (std::size_t i = 0; i < pp; ++i) {
      std::size_t smaller = 0;
      for (std::size_t j = i + 1; j < pp; ++j) smaller += w[j] < w[i];
      offset = offset * (pp - i) + smaller;
    }
    return offset;
  }

  int p_;
  std::size_t n_ = 0;
  std::vector<std::uint8_t> words_;
  std::vector<std::size_t> inverse_;
  std::vector<int> cycles_;
  std::vector<std::uint32_t> compose_;
};

inline GroupTables build_tables(int p, int max_items = kDefaultMaxItems) {
  return GroupTables(p, max_items);
}

}  // namespace rankda
