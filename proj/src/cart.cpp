#include "tierplan/cart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace tierplan {

std::vector<std::pair<std::string, std::vector<std::string>>> feature_matrix::stage_universe() const {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    for (const auto &c : columns) {
        if (c.kind != feature_column::one_hot) continue;
        if (out.empty() || out.back().first != c.stage) out.push_back({c.stage, {}});
        out.back().second.push_back(c.tier);
    }
    return out;
}

feature_matrix encode(const std::vector<evaluated_config> &configs, const tier_catalog &tiers,
                      std::optional<double> scale) {
    if (configs.empty())
        throw error(errc::too_few_rows, "no configurations to encode");

    std::vector<std::string> stages;
    for (const auto &[name, tier] : configs.front().asg.tier_of) stages.push_back(name);
    for (const auto &c : configs) {
        if (c.asg.tier_of.size() != stages.size())
            throw error(errc::inconsistent_stage_sets, "configurations disagree on stage count");
        for (const auto &s : stages)
            if (!c.asg.tier_of.count(s))
                throw error(errc::inconsistent_stage_sets, "configuration misses stage " + s);
    }

    std::map<std::string, std::set<std::string>> observed;
    for (const auto &c : configs)
        for (const auto &[stage, tier] : c.asg.tier_of) observed[stage].insert(tier);

    feature_matrix X;
    for (const auto &[stage, tier_set] : observed) {
        std::vector<std::string> ordered(tier_set.begin(), tier_set.end());
        std::sort(ordered.begin(), ordered.end(), [&](const std::string &a, const std::string &b) {
            return find_tier(tiers, a).speed_rank < find_tier(tiers, b).speed_rank;
        });
        for (const auto &t : ordered)
            X.columns.push_back({feature_column::one_hot, stage, t});
    }
    if (scale) X.columns.push_back({feature_column::scale, "", ""});
    X.has_scale = scale.has_value();

    X.values.reserve(configs.size() * X.columns.size());
    for (const auto &c : configs) {
        for (const auto &col : X.columns) {
            if (col.kind == feature_column::scale)
                X.values.push_back(*scale);
            else
                X.values.push_back(c.asg.tier_of.at(col.stage) == col.tier ? 1.0 : 0.0);
        }
        X.y.push_back(c.makespan);
        X.config_index.push_back(c.index);
        X.row_scale.push_back(scale ? *scale : 0.0);
    }
    return X;
}

feature_matrix concat(const feature_matrix &a, const feature_matrix &b) {
    if (a.columns != b.columns)
        throw error(errc::inconsistent_stage_sets, "feature matrices have different columns");
    feature_matrix out = a;
    out.values.insert(out.values.end(), b.values.begin(), b.values.end());
    out.y.insert(out.y.end(), b.y.begin(), b.y.end());
    out.config_index.insert(out.config_index.end(), b.config_index.begin(), b.config_index.end());
    out.row_scale.insert(out.row_scale.end(), b.row_scale.begin(), b.row_scale.end());
    return out;
}

namespace {

struct moments {
    double sum = 0.0;
    double sumsq = 0.0;
    std::size_t n = 0;

    void add(double y) { sum += y; sumsq += y * y; ++n; }
    double sse() const {
        if (n == 0) return 0.0;
        double s = sumsq - sum * sum / static_cast<double>(n);
        return s > 0.0 ? s : 0.0;
    }
};

moments moments_of(const feature_matrix &X, const std::vector<std::size_t> &rows) {
    moments m;
    for (auto r : rows) m.add(X.y[r]);
    return m;
}

struct split_choice {
    bool found = false;
    int col = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

split_choice best_split(const feature_matrix &X, const std::vector<std::size_t> &rows,
                        double node_sse, std::size_t min_leaf) {
    split_choice best;
    for (std::size_t col = 0; col < X.cols(); ++col) {
        if (X.columns[col].kind == feature_column::one_hot) {
            moments left; // value 0
            moments right;
            for (auto r : rows)
                (X.at(r, col) < 0.5 ? left : right).add(X.y[r]);
            if (left.n < min_leaf || right.n < min_leaf) continue;
            double gain = node_sse - left.sse() - right.sse();
            if (gain > 0.0 && (!best.found || gain > best.gain)) {
                best = {true, static_cast<int>(col), 0.5, gain};
            }
        } else {
            std::vector<std::pair<double, double>> vals; // (x, y)
            vals.reserve(rows.size());
            for (auto r : rows) vals.push_back({X.at(r, col), X.y[r]});
            std::sort(vals.begin(), vals.end(),
                      [](const auto &a, const auto &b) { return a.first < b.first; });
            moments left;
            moments right;
            for (const auto &[x, y] : vals) right.add(y);
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                left.add(vals[i].second);
                right.sum -= vals[i].second;
                right.sumsq -= vals[i].second * vals[i].second;
                --right.n;
                if (vals[i].first == vals[i + 1].first) continue;
                if (left.n < min_leaf || right.n < min_leaf) continue;
                double thr = 0.5 * (vals[i].first + vals[i + 1].first);
                double gain = node_sse - left.sse() - right.sse();
                // Columns scan ascending and thresholds ascend within a column,
                // so strict improvement keeps the lowest column, lowest threshold.
                if (gain > 0.0 && (!best.found || gain > best.gain)) {
                    best = {true, static_cast<int>(col), thr, gain};
                }
            }
        }
    }
    return best;
}

} // namespace

std::size_t cart_tree::leaf_count() const { return leaves().size(); }

std::vector<int> cart_tree::leaves() const {
    // Walk from the root: collapsed subtrees can leave unreachable nodes behind.
    std::vector<int> out;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        const auto &node = nodes[static_cast<std::size_t>(n)];
        if (node.col < 0) {
            out.push_back(n);
        } else {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

int cart_tree::leaf_of(const feature_matrix &X, std::size_t row) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].col >= 0) {
        const auto &node = nodes[static_cast<std::size_t>(n)];
        n = X.at(row, static_cast<std::size_t>(node.col)) < node.threshold ? node.left : node.right;
    }
    return n;
}

double cart_tree::predict(const feature_matrix &X, std::size_t row) const {
    return nodes[static_cast<std::size_t>(leaf_of(X, row))].prediction;
}

cart_tree fit_cart(const feature_matrix &X, const cart_params &p) {
    if (X.rows() < 2 * p.min_leaf)
        throw error(errc::too_few_rows, "need at least 2*min_leaf rows, got " +
                                            std::to_string(X.rows()));
    cart_tree tree;
    tree.total_rows = X.rows();

    struct pending {
        int node;
        std::size_t depth;
    };
    std::vector<std::size_t> all(X.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    auto make_node = [&](std::vector<std::size_t> rows) {
        cart_node n;
        auto m = moments_of(X, rows);
        n.prediction = m.sum / static_cast<double>(m.n);
        n.sse = m.sse();
        n.members = std::move(rows);
        tree.nodes.push_back(std::move(n));
        return static_cast<int>(tree.nodes.size() - 1);
    };

    std::vector<pending> stack;
    stack.push_back({make_node(std::move(all)), 0});
    while (!stack.empty()) {
        auto [ni, depth] = stack.back();
        stack.pop_back();
        auto &node = tree.nodes[static_cast<std::size_t>(ni)];
        if (depth >= p.max_depth || node.sse <= 0.0 || node.members.size() < 2 * p.min_leaf)
            continue;
        auto choice = best_split(X, node.members, node.sse, p.min_leaf);
        if (!choice.found) continue;
        std::vector<std::size_t> lrows, rrows;
        for (auto r : node.members)
            (X.at(r, static_cast<std::size_t>(choice.col)) < choice.threshold ? lrows : rrows)
                .push_back(r);
        int li = make_node(std::move(lrows));
        int ri = make_node(std::move(rrows));
        auto &n2 = tree.nodes[static_cast<std::size_t>(ni)]; // make_node may reallocate
        n2.col = choice.col;
        n2.threshold = choice.threshold;
        n2.left = li;
        n2.right = ri;
        stack.push_back({ri, depth + 1});
        stack.push_back({li, depth + 1});
    }
    return tree;
}

namespace {

struct subtree_stats {
    double leaf_sse = 0.0;
    std::size_t leaves = 0;
};

subtree_stats collect(const cart_tree &t, int n) {
    const auto &node = t.nodes[static_cast<std::size_t>(n)];
    if (node.col < 0) return {node.sse, 1};
    auto l = collect(t, node.left);
    auto r = collect(t, node.right);
    return {l.leaf_sse + r.leaf_sse, l.leaves + r.leaves};
}

// Weakest link of the current tree: min over internal nodes of
// (R(node) - R(subtree leaves)) / (leaves - 1), R normalized by total rows.
struct weakest {
    double alpha = std::numeric_limits<double>::infinity();
    std::vector<int> nodes;
};

weakest find_weakest(const cart_tree &t) {
    weakest w;
    double n_total = static_cast<double>(t.total_rows);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        if (t.nodes[i].col < 0) continue;
        auto st = collect(t, static_cast<int>(i));
        double alpha = (t.nodes[i].sse - st.leaf_sse) / n_total /
                       (static_cast<double>(st.leaves) - 1.0);
        if (alpha < w.alpha) {
            w.alpha = alpha;
            w.nodes.assign(1, static_cast<int>(i));
        } else if (alpha == w.alpha) {
            w.nodes.push_back(static_cast<int>(i));
        }
    }
    return w;
}

void collapse(cart_tree &t, int n) {
    auto &node = t.nodes[static_cast<std::size_t>(n)];
    if (node.col < 0) return;
    collapse(t, node.left);
    collapse(t, node.right);
    node.col = -1;
    node.left = node.right = -1;
}

// Drops nodes that are no longer reachable so leaf_count and routing agree.
cart_tree compact(const cart_tree &t) {
    cart_tree out;
    out.total_rows = t.total_rows;
    std::vector<int> remap(t.nodes.size(), -1);
    // Depth-first from the root, preserving child order.
    std::vector<int> stack{0};
    std::vector<int> order;
    while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        order.push_back(n);
        const auto &node = t.nodes[static_cast<std::size_t>(n)];
        if (node.col >= 0) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
    }
    std::sort(order.begin(), order.end());
    for (std::size_t k = 0; k < order.size(); ++k) remap[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
    for (int n : order) {
        cart_node copy = t.nodes[static_cast<std::size_t>(n)];
        if (copy.col >= 0) {
            copy.left = remap[static_cast<std::size_t>(copy.left)];
            copy.right = remap[static_cast<std::size_t>(copy.right)];
        }
        out.nodes.push_back(std::move(copy));
    }
    return out;
}

} // namespace

std::vector<pruning_step> ccp_path(const cart_tree &tree) {
    std::vector<pruning_step> path;
    cart_tree work = tree;
    path.push_back({0.0, work.leaf_count()});
    while (work.nodes[0].col >= 0) {
        auto w = find_weakest(work);
        for (int n : w.nodes) collapse(work, n);
        std::size_t leaves = work.leaf_count();
        if (!path.empty() && path.back().alpha == w.alpha)
            path.back().leaves = leaves;
        else
            path.push_back({w.alpha, leaves});
    }
    return path;
}

cart_tree prune_at(const cart_tree &tree, double alpha) {
    cart_tree work = tree;
    while (work.nodes[0].col >= 0) {
        auto w = find_weakest(work);
        if (w.alpha > alpha) break;
        for (int n : w.nodes) collapse(work, n);
    }
    return compact(work);
}

} // namespace tierplan
