#pragma once

// Reporting helpers: the policy comparison table and a DOT rendering of the
// top regions, one glyph row per stage with one marker per tier.

#include <string>
#include <vector>

#include "tierplan/baselines.hpp"
#include "tierplan/regions.hpp"

namespace tierplan {

struct policy_score {
    std::string policy;
    double pc = 0.0;          // pairwise concordance with measured makespans
    double pct_worse = 0.0;   // (pc_region / pc - 1) * 100; 0 for the region row
};

// Scores fsf, ltl, hybrid, and the region model over one evaluated table.
std::vector<policy_score> compare_policies(const projected_dag &dag,
                                           const std::vector<evaluated_config> &configs,
                                           const region_model &model);

// CSV with header: policy,pc,pct_worse_than_region_model
std::string comparison_csv(const std::vector<policy_score> &scores);

// One cluster per region (median-ascending, at most top_k), one node per
// stage labelled with filled markers for admissible tiers in speed-rank
// order, plus the stage-to-stage edges.
std::string region_glyphs_dot(const projected_dag &dag, const region_model &model,
                              std::size_t top_k);

} // namespace tierplan
