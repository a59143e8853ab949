#pragma once

// Cross-fitted selection of the pruning penalty and the final region model.
//
// The model partitions the configuration space into performance regions:
// leaves of a pruned regression tree, each carrying a per-stage admissible
// tier rule, sorted by median makespan. The penalty is picked on a grid from
// repeated K-fold splits, trading held-out accuracy against how cleanly the
// held-out rows separate across leaves.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tierplan/cart.hpp"
#include "tierplan/stats.hpp"

namespace tierplan {

struct cv_row {
    double alpha = 0.0;
    double mae_med = 0.0;
    double sep_med = 0.0;
    double j = 0.0; // 0.5 * sep_norm + 0.5 * (1 - mae_norm)
};

struct cross_fit_params {
    std::size_t folds = 5;   // K
    std::size_t repeats = 3; // R
    cart_params cart;
    separation_params sep;
    unsigned threads = 1;
};

struct cross_fit_result {
    double alpha_star = 0.0;
    std::vector<cv_row> report;
};

// Deterministic fold assignment for one repeat: a seeded shuffle of row
// indices chunked into `folds` parts. Exposed so leakage and coverage are
// directly testable.
std::vector<std::vector<std::size_t>> make_folds(std::size_t rows, std::size_t folds,
                                                 std::uint64_t seed, std::size_t repeat);

// Repeated K-fold scan over the union pruning grid. Median test error and
// median test separation per alpha are min-max normalized; the winner
// maximizes their balance, ties resolving to the larger alpha. Needs
// rows >= folds * min_leaf.
cross_fit_result cross_fit_select(const feature_matrix &X, std::uint64_t seed,
                                  const cross_fit_params &params);

struct region_rule {
    // Stage -> admissible tiers, in speed-rank order. Stages the path never
    // constrains keep their full tier universe.
    std::vector<std::pair<std::string, std::vector<std::string>>> admissible;
    double scale_min = -std::numeric_limits<double>::infinity();
    double scale_max = std::numeric_limits<double>::infinity(); // half-open: scale < max

    bool matches(const feature_matrix &X, std::size_t row) const;
};

struct region {
    std::size_t index = 0;
    double median_makespan = 0.0;
    std::vector<std::size_t> members; // row ids
    region_rule rule;
    double prediction = 0.0; // leaf mean
};

struct region_model {
    double alpha_star = 0.0;
    std::uint64_t seed = 0;
    cross_fit_params params;
    std::vector<cv_row> cv_report;
    std::vector<feature_column> columns;
    std::vector<region> regions;        // sorted by median makespan
    std::vector<std::size_t> row_region; // row -> region index
    std::vector<double> row_y;
    std::vector<std::uint64_t> row_config_index;
    cart_tree tree; // pruned tree the regions came from
};

// Refits on all rows at alpha_star and extracts one region per leaf.
region_model finalize(const feature_matrix &X, double alpha_star, const cross_fit_params &params,
                      std::uint64_t seed, const std::vector<cv_row> &cv_report);

// cross_fit_select + finalize.
region_model mine_regions(const feature_matrix &X, std::uint64_t seed,
                          const cross_fit_params &params);

struct epsilon_entry {
    std::size_t region_index = 0;
    double max_rel_spread = 0.0; // (max - min) / median over members
    bool pass = false;
};

struct epsilon_report {
    double epsilon = 0.0;
    std::vector<epsilon_entry> regions;
    bool all_pass = false;
};

epsilon_report epsilon_check(const region_model &model, double epsilon);

// Structured-text round trip and the flat membership table
// (config_index, region_index, makespan_s).
std::string serialize_region_model(const region_model &model);
region_model parse_region_model(const std::string &json_text);
region_model load_region_model_file(const std::string &path);
std::string membership_csv(const region_model &model);

} // namespace tierplan
