#pragma once

// Query answering over evaluated configuration tables and region models:
// placement recommendations under node caps, tier allow/deny lists and
// deadlines, plus explanatory analyses (where the time goes, which stages
// matter, how fragile the critical path is).

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tierplan/baselines.hpp"
#include "tierplan/config_space.hpp"
#include "tierplan/regions.hpp"

namespace tierplan {

enum class query_kind {
    best_under_node_cap,   // scan candidate node counts up to a cap
    best_within_tiers,     // every stage restricted to an allow list
    deadline_excluding,    // meet a deadline while avoiding tiers
    tier_unavailable,      // re-rank after dropping tiers
};

struct qos_query {
    query_kind kind = query_kind::best_within_tiers;
    std::vector<int> candidate_nodes; // best_under_node_cap
    int max_nodes = 0;                // best_under_node_cap
    std::vector<std::string> allowed_tiers;
    std::vector<std::string> excluded_tiers;
    double deadline_s = 0.0;
    std::optional<int> scale; // which evaluated table to query (single-table default)
    std::size_t top_k = 3;    // alternatives
};

struct scale_dataset {
    int task_scale = 1;
    std::vector<evaluated_config> configs; // makespan-ascending
    const region_model *model = nullptr;
};

struct placement {
    int task_scale = 1;
    assignment asg;
    double makespan = 0.0;
    std::size_t region_index = 0;
};

struct recommendation {
    bool matched = false;
    std::optional<placement> chosen;
    std::vector<placement> alternatives;
    std::vector<std::string> rationale;
    std::string denial_reason; // "empty_feasible_set" or "deadline_miss"
    double deadline_gap_s = 0.0; // how far the best feasible config misses
};

recommendation answer(const qos_query &query, std::span<const scale_dataset> data);

qos_query parse_query(const std::string &json_text);
qos_query load_query_file(const std::string &path);
std::string serialize_recommendation(const recommendation &rec);

// Time split of one evaluated configuration: relocation seconds, execution
// seconds on remote-class tiers, execution seconds on local-class tiers.
// The three parts and the three shares sum exactly to the makespan and 1.
struct cost_composition_result {
    double movement_s = 0.0;
    double shared_io_s = 0.0;
    double local_io_s = 0.0;
    double movement_share = 0.0;
    double shared_io_share = 0.0;
    double local_io_share = 0.0;
};

cost_composition_result cost_composition(const evaluated_config &config, const tier_catalog &tiers);

struct stage_sensitivity {
    std::string stage;
    bool dont_care = false; // full tier freedom and swaps stay under epsilon
    double max_rel_swing = 0.0;
};

struct region_sensitivity {
    std::size_t region_index = 0;
    std::vector<stage_sensitivity> stages;
};

struct sensitivity_report {
    double epsilon = 0.0;
    std::vector<region_sensitivity> regions;
    std::vector<stage_sensitivity> overall; // critical if critical anywhere
    // (stage, tier) -> share of configs whose trace contains that pair.
    std::vector<std::tuple<std::string, std::string, double>> trace_frequency;
};

sensitivity_report sensitivity_classify(const std::vector<evaluated_config> &configs,
                                        const region_model &model, double epsilon);

struct robustness_report {
    bool trace_stable = true;   // no single +-rho perturbation changes a straggler
    double worst_case_delta_s = 0.0;
    double worst_case_rel_delta = 0.0;
    std::size_t rank_shift_bound = 0; // 0 when no population was given
    bool rank_bound_known = false;
};

// One-at-a-time +-rho perturbation of every per-stage component time.
robustness_report robustness(const evaluated_config &config, const projected_dag &dag,
                             const storage_profile &profile, double rho,
                             std::span<const double> population_makespans = {});

} // namespace tierplan
