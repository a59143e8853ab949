#pragma once

// Placement heuristics to rank configurations without measuring them, plus
// the concordance metric that scores any ranking against true makespans.
//
// fsf: prefer configurations that put more stages on the fastest tiers.
// ltl: prefer configurations with fewer data relocations across stage
//      boundaries.
// hybrid: blend of the two, each min-max normalized over the config set.

#include <cstdint>
#include <vector>

#include "tierplan/config_space.hpp"
#include "tierplan/regions.hpp"

namespace tierplan {

// ordering[rank] = position into the scored config list; rank 0 is best.
using ordering = std::vector<std::size_t>;

ordering order_fsf(const std::vector<evaluated_config> &configs, const tier_catalog &tiers);

ordering order_ltl(const std::vector<evaluated_config> &configs, const projected_dag &dag);

ordering order_hybrid(const std::vector<evaluated_config> &configs, const projected_dag &dag);

// Ranks by region (ascending median), then leaf prediction, then enumeration
// index. model.row_* arrays must align with configs by config index.
ordering order_region_model(const region_model &model, const std::vector<evaluated_config> &configs);

// Fraction of unordered pairs ranked consistently with the measured
// makespans; pairs with equal makespans count half. Needs >= 2 configs and an
// ordering that is a permutation of their positions.
double pairwise_concordance(const ordering &order, const std::vector<double> &makespans);

// Relocation count used by ltl: edges whose resolved endpoint tiers differ
// (external endpoints resolve to the initial/final data tier).
std::size_t transition_count(const projected_dag &dag, const assignment &asg);

} // namespace tierplan
