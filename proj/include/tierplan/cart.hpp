#pragma once

// Regression tree over tier-placement indicators.
//
// Configurations become rows of one-hot (stage, tier) columns plus an
// optional numeric scale column; the target is the measured makespan.
// fit_cart grows a binary tree by greedy squared-error reduction, ccp_path
// computes the weakest-link pruning schedule, prune_at collapses the tree
// for a given complexity penalty.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tierplan/config_space.hpp"

namespace tierplan {

struct feature_column {
    enum kind_t { one_hot, scale } kind = one_hot;
    std::string stage;
    std::string tier;

    bool operator==(const feature_column &) const = default;
};

struct feature_matrix {
    std::vector<feature_column> columns;
    std::vector<double> values; // row-major, rows() x columns.size()
    std::vector<double> y;
    std::vector<std::uint64_t> config_index; // row -> source config index
    std::vector<double> row_scale;           // row -> scale (0 when absent)
    bool has_scale = false;

    std::size_t rows() const { return y.size(); }
    std::size_t cols() const { return columns.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * cols() + col]; }

    // Stage -> tier universe, in column order.
    std::vector<std::pair<std::string, std::vector<std::string>>> stage_universe() const;
};

// One-hot encodes every (stage, observed tier) pair, columns ordered by stage
// name then tier speed_rank. When scale is present a trailing numeric column
// is added (constant columns are simply never split). Throws
// errc::inconsistent_stage_sets when configs disagree on their stage set.
feature_matrix encode(const std::vector<evaluated_config> &configs, const tier_catalog &tiers,
                      std::optional<double> scale = std::nullopt);

// Row-wise concatenation; column sets must match exactly.
feature_matrix concat(const feature_matrix &a, const feature_matrix &b);

struct cart_params {
    std::size_t min_leaf = 5;
    std::size_t max_depth = 12;
};

struct cart_node {
    int col = -1;         // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prediction = 0.0; // mean target of members
    double sse = 0.0;        // sum of squared errors of members
    std::vector<std::size_t> members;
};

struct cart_tree {
    std::vector<cart_node> nodes; // root at 0
    std::size_t total_rows = 0;

    bool is_leaf(int n) const { return nodes[static_cast<std::size_t>(n)].col < 0; }
    std::size_t leaf_count() const;
    double predict(const feature_matrix &X, std::size_t row) const;
    int leaf_of(const feature_matrix &X, std::size_t row) const;
    std::vector<int> leaves() const; // node ids, stable order
};

// Greedy variance-reduction fit. Split ties resolve to the lowest column
// index, then the lowest threshold. Needs rows >= 2 * min_leaf.
cart_tree fit_cart(const feature_matrix &X, const cart_params &p);

struct pruning_step {
    double alpha = 0.0;
    std::size_t leaves = 0;
};

// Weakest-link schedule: alpha values strictly increasing, leaf counts
// strictly decreasing, ending at the single-leaf tree.
std::vector<pruning_step> ccp_path(const cart_tree &tree);

// Collapses every subtree whose weakest link is <= alpha.
cart_tree prune_at(const cart_tree &tree, double alpha);

} // namespace tierplan
