#pragma once

// Shared model instances for the unit and acceptance tests.

#include <cmath>
#include <memory>

#include "rankda/model.hpp"

namespace rankda::testing {

inline std::shared_ptr<const GroupTables> tables(int p) { return std::make_shared<const GroupTables>(p); }

/// p = 2, g = 2 instance with a = (2, 1), a uniform prior on the central
/// ranks and counts n_1 = (40, 10), n_2 = (14, 36).
inline Model two_mode_model() {
  const auto t = tables(2);
  return Model(t, RankCounts(2, {{40, 10}, {14, 36}}), HyperParams::from_lambda(std::log(2.0), *t, 0.5),
               PriorPi::uniform(2, 2));
}

inline Model make_model(int p, std::vector<std::vector<std::int64_t>> counts, double lambda, double scale = 1.0) {
  const auto t = tables(p);
  const std::size_t g = counts.size();
  return Model(t, RankCounts(p, std::move(counts)), HyperParams::from_lambda(lambda, *t, scale),
               PriorPi::uniform(g, t->size()));
}

inline CentralRanks ranks(std::initializer_list<std::size_t> v) {
  std::vector<PermIndex> out;
  for (auto k : v) out.emplace_back(k);
  return CentralRanks(out);
}

}  // namespace rankda::testing
