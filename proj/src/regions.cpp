#include "tierplan/regions.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace tierplan {

using json = nlohmann::ordered_json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Unbiased bounded draw; mt19937_64 output is pinned by the standard, so the
// whole fold layout is reproducible across platforms.
std::uint64_t bounded(std::mt19937_64 &g, std::uint64_t n) {
    std::uint64_t threshold = (~n + 1) % n;
    for (;;) {
        std::uint64_t r = g();
        if (r >= threshold) return r % n;
    }
}

feature_matrix subset(const feature_matrix &X, const std::vector<std::size_t> &rows) {
    feature_matrix out;
    out.columns = X.columns;
    out.has_scale = X.has_scale;
    out.values.reserve(rows.size() * X.cols());
    for (auto r : rows) {
        for (std::size_t c = 0; c < X.cols(); ++c) out.values.push_back(X.at(r, c));
        out.y.push_back(X.y[r]);
        out.config_index.push_back(X.config_index[r]);
        out.row_scale.push_back(X.row_scale[r]);
    }
    return out;
}

cart_tree stump(const feature_matrix &X) {
    cart_tree t;
    t.total_rows = X.rows();
    cart_node n;
    double sum = 0.0, sumsq = 0.0;
    for (double v : X.y) { sum += v; sumsq += v * v; }
    n.prediction = sum / static_cast<double>(X.rows());
    double sse = sumsq - sum * sum / static_cast<double>(X.rows());
    n.sse = sse > 0.0 ? sse : 0.0;
    n.members.resize(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) n.members[i] = i;
    t.nodes.push_back(std::move(n));
    return t;
}

} // namespace

std::vector<std::vector<std::size_t>> make_folds(std::size_t rows, std::size_t folds,
                                                 std::uint64_t seed, std::size_t repeat) {
    if (folds < 2) throw error(errc::insufficient_data, "need at least 2 folds");
    if (rows < folds) throw error(errc::insufficient_data, "fewer rows than folds");
    std::vector<std::size_t> idx(rows);
    for (std::size_t i = 0; i < rows; ++i) idx[i] = i;
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(0xF01Dull + repeat)));
    for (std::size_t i = rows - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(bounded(rng, i + 1));
        std::swap(idx[i], idx[j]);
    }
    std::vector<std::vector<std::size_t>> out(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        std::size_t b = f * rows / folds;
        std::size_t e = (f + 1) * rows / folds;
        out[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(b),
                      idx.begin() + static_cast<std::ptrdiff_t>(e));
        std::sort(out[f].begin(), out[f].end());
    }
    return out;
}

namespace {

struct split_eval {
    double mae = 0.0;
    double sep = 0.0;
};

split_eval evaluate_split(const feature_matrix &X, const cart_tree &pruned,
                          const std::vector<std::size_t> &test_rows, const separation_params &sp) {
    split_eval out;
    double abs_err = 0.0;
    std::map<int, std::vector<double>> by_leaf;
    for (auto r : test_rows) {
        int leaf = pruned.leaf_of(X, r);
        abs_err += std::abs(X.y[r] - pruned.nodes[static_cast<std::size_t>(leaf)].prediction);
        by_leaf[leaf].push_back(X.y[r]);
    }
    out.mae = abs_err / static_cast<double>(test_rows.size());
    std::vector<std::vector<double>> groups;
    groups.reserve(by_leaf.size());
    for (auto &[leaf, ys] : by_leaf) groups.push_back(std::move(ys));
    out.sep = separation(groups, sp).value;
    return out;
}

void run_parallel(std::size_t jobs, unsigned threads, const std::function<void(std::size_t)> &fn) {
    if (threads <= 1 || jobs <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    unsigned t = std::min<unsigned>(threads, static_cast<unsigned>(jobs));
    pool.reserve(t);
    for (unsigned k = 0; k < t; ++k) pool.emplace_back(worker);
    for (auto &th : pool) th.join();
}

} // namespace

cross_fit_result cross_fit_select(const feature_matrix &X, std::uint64_t seed,
                                  const cross_fit_params &params) {
    const std::size_t K = params.folds;
    const std::size_t R = params.repeats;
    if (K < 2) throw error(errc::insufficient_data, "need at least 2 folds");
    if (R < 1) throw error(errc::insufficient_data, "need at least 1 repeat");
    if (X.rows() < K * params.cart.min_leaf)
        throw error(errc::insufficient_data,
                    "need at least folds*min_leaf rows, got " + std::to_string(X.rows()));

    struct split {
        std::vector<std::size_t> train;
        std::vector<std::size_t> test;
        cart_tree grown;
        std::vector<pruning_step> path;
    };
    std::vector<split> splits(K * R);
    for (std::size_t r = 0; r < R; ++r) {
        auto folds = make_folds(X.rows(), K, seed, r);
        for (std::size_t f = 0; f < K; ++f) {
            auto &sp = splits[r * K + f];
            sp.test = folds[f];
            for (std::size_t g = 0; g < K; ++g) {
                if (g == f) continue;
                sp.train.insert(sp.train.end(), folds[g].begin(), folds[g].end());
            }
            std::sort(sp.train.begin(), sp.train.end());
        }
    }

    run_parallel(splits.size(), params.threads, [&](std::size_t i) {
        auto &sp = splits[i];
        feature_matrix Xtrain = subset(X, sp.train);
        sp.grown = Xtrain.rows() >= 2 * params.cart.min_leaf ? fit_cart(Xtrain, params.cart)
                                                             : stump(Xtrain);
        sp.path = ccp_path(sp.grown);
    });

    std::vector<double> raw;
    for (const auto &sp : splits)
        for (const auto &step : sp.path) raw.push_back(step.alpha);
    std::sort(raw.begin(), raw.end());
    raw.erase(std::unique(raw.begin(), raw.end()), raw.end());

    std::vector<double> grid;
    grid.push_back(0.0);
    for (std::size_t k = 0; k + 1 < raw.size(); ++k)
        grid.push_back(std::sqrt(raw[k] * raw[k + 1]));
    if (!raw.empty()) grid.push_back(raw.back());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::vector<std::vector<split_eval>> evals(splits.size(),
                                               std::vector<split_eval>(grid.size()));
    run_parallel(splits.size(), params.threads, [&](std::size_t i) {
        cart_tree work = splits[i].grown;
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            work = prune_at(work, grid[gi]); // grid ascends, pruning is nested
            evals[i][gi] = evaluate_split(X, work, splits[i].test, params.sep);
        }
    });

    std::vector<double> mae_med(grid.size()), sep_med(grid.size());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        std::vector<double> maes, seps;
        maes.reserve(splits.size());
        seps.reserve(splits.size());
        for (std::size_t i = 0; i < splits.size(); ++i) {
            maes.push_back(evals[i][gi].mae);
            seps.push_back(evals[i][gi].sep);
        }
        mae_med[gi] = median(std::move(maes));
        sep_med[gi] = median(std::move(seps));
    }

    auto mae_norm = minmax_normalize(mae_med);
    auto sep_norm = minmax_normalize(sep_med);

    cross_fit_result res;
    std::size_t best = 0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        double j = 0.5 * sep_norm[gi] + 0.5 * (1.0 - mae_norm[gi]);
        res.report.push_back({grid[gi], mae_med[gi], sep_med[gi], j});
        if (j >= res.report[best].j) best = gi; // ties to the larger alpha
    }
    res.alpha_star = grid[best];
    return res;
}

bool region_rule::matches(const feature_matrix &X, std::size_t row) const {
    if (X.has_scale) {
        double s = X.row_scale[row];
        if (!(s >= scale_min && s < scale_max)) return false;
    }
    for (const auto &[stage, allowed] : admissible) {
        std::string tier;
        for (std::size_t c = 0; c < X.cols(); ++c) {
            const auto &col = X.columns[c];
            if (col.kind == feature_column::one_hot && col.stage == stage && X.at(row, c) >= 0.5) {
                tier = col.tier;
                break;
            }
        }
        if (std::find(allowed.begin(), allowed.end(), tier) == allowed.end()) return false;
    }
    return true;
}

region_model finalize(const feature_matrix &X, double alpha_star, const cross_fit_params &params,
                      std::uint64_t seed, const std::vector<cv_row> &cv_report) {
    region_model model;
    model.alpha_star = alpha_star;
    model.seed = seed;
    model.params = params;
    model.cv_report = cv_report;
    model.columns = X.columns;
    model.row_y = X.y;
    model.row_config_index = X.config_index;

    cart_tree grown =
        X.rows() >= 2 * params.cart.min_leaf ? fit_cart(X, params.cart) : stump(X);
    model.tree = prune_at(grown, alpha_star);

    auto universe = X.stage_universe();

    struct path_state {
        int node;
        region_rule rule;
    };
    std::vector<region> regions;
    path_state root;
    root.node = 0;
    root.rule.admissible = universe;
    std::vector<path_state> stack{root};
    while (!stack.empty()) {
        path_state st = std::move(stack.back());
        stack.pop_back();
        const auto &node = model.tree.nodes[static_cast<std::size_t>(st.node)];
        if (node.col < 0) {
            region r;
            r.members = node.members;
            r.rule = std::move(st.rule);
            r.prediction = node.prediction;
            std::vector<double> ys;
            ys.reserve(r.members.size());
            for (auto m : r.members) ys.push_back(X.y[m]);
            r.median_makespan = median(std::move(ys));
            regions.push_back(std::move(r));
            continue;
        }
        const feature_column &fc = X.columns[static_cast<std::size_t>(node.col)];
        path_state left{node.left, st.rule};
        path_state right{node.right, st.rule};
        if (fc.kind == feature_column::one_hot) {
            for (auto &[stage, allowed] : left.rule.admissible)
                if (stage == fc.stage)
                    allowed.erase(std::remove(allowed.begin(), allowed.end(), fc.tier),
                                  allowed.end());
            for (auto &[stage, allowed] : right.rule.admissible)
                if (stage == fc.stage) allowed = {fc.tier};
        } else {
            left.rule.scale_max = std::min(left.rule.scale_max, node.threshold);
            right.rule.scale_min = std::max(right.rule.scale_min, node.threshold);
        }
        stack.push_back(std::move(right));
        stack.push_back(std::move(left));
    }

    std::stable_sort(regions.begin(), regions.end(),
                     [](const region &a, const region &b) {
                         return a.median_makespan < b.median_makespan;
                     });
    model.row_region.assign(X.rows(), 0);
    for (std::size_t i = 0; i < regions.size(); ++i) {
        regions[i].index = i;
        for (auto m : regions[i].members) model.row_region[m] = i;
    }
    model.regions = std::move(regions);
    return model;
}

region_model mine_regions(const feature_matrix &X, std::uint64_t seed,
                          const cross_fit_params &params) {
    auto cv = cross_fit_select(X, seed, params);
    return finalize(X, cv.alpha_star, params, seed, cv.report);
}

epsilon_report epsilon_check(const region_model &model, double epsilon) {
    epsilon_report rep;
    rep.epsilon = epsilon;
    rep.all_pass = true;
    for (const auto &r : model.regions) {
        epsilon_entry e;
        e.region_index = r.index;
        if (r.members.size() >= 2) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (auto m : r.members) {
                lo = std::min(lo, model.row_y[m]);
                hi = std::max(hi, model.row_y[m]);
            }
            e.max_rel_spread = (hi - lo) / r.median_makespan;
        }
        e.pass = e.max_rel_spread < epsilon;
        rep.all_pass = rep.all_pass && e.pass;
        rep.regions.push_back(e);
    }
    return rep;
}

namespace {

json rule_to_json(const region_rule &rule) {
    json stages = json::object();
    for (const auto &[stage, allowed] : rule.admissible) stages[stage] = allowed;
    json out;
    out["stages"] = stages;
    out["scale_min"] =
        std::isinf(rule.scale_min) ? json(nullptr) : json(rule.scale_min);
    out["scale_max"] =
        std::isinf(rule.scale_max) ? json(nullptr) : json(rule.scale_max);
    return out;
}

region_rule rule_from_json(const json &j) {
    region_rule rule;
    for (auto it = j.at("stages").begin(); it != j.at("stages").end(); ++it)
        rule.admissible.push_back({it.key(), it.value().get<std::vector<std::string>>()});
    if (!j.at("scale_min").is_null()) rule.scale_min = j.at("scale_min").get<double>();
    if (!j.at("scale_max").is_null()) rule.scale_max = j.at("scale_max").get<double>();
    return rule;
}

} // namespace

std::string serialize_region_model(const region_model &model) {
    json root;
    root["alpha_star"] = model.alpha_star;
    root["seed"] = model.seed;
    root["params"] = {{"folds", model.params.folds},
                      {"repeats", model.params.repeats},
                      {"min_leaf", model.params.cart.min_leaf},
                      {"max_depth", model.params.cart.max_depth},
                      {"g_floor", model.params.sep.g_floor},
                      {"g_cap", model.params.sep.g_cap},
                      {"delta", model.params.sep.delta},
                      {"min_leaf_eval", model.params.sep.min_leaf_eval}};
    root["cv_report"] = json::array();
    for (const auto &row : model.cv_report)
        root["cv_report"].push_back({{"alpha", row.alpha},
                                     {"mae_med", row.mae_med},
                                     {"sep_med", row.sep_med},
                                     {"j", row.j}});
    root["columns"] = json::array();
    for (const auto &c : model.columns) {
        if (c.kind == feature_column::scale)
            root["columns"].push_back({{"kind", "scale"}});
        else
            root["columns"].push_back({{"kind", "one_hot"}, {"stage", c.stage}, {"tier", c.tier}});
    }
    root["tree"] = json::array();
    for (const auto &n : model.tree.nodes)
        root["tree"].push_back({{"col", n.col},
                                {"threshold", n.threshold},
                                {"left", n.left},
                                {"right", n.right},
                                {"prediction", n.prediction}});
    root["regions"] = json::array();
    for (const auto &r : model.regions)
        root["regions"].push_back({{"index", r.index},
                                   {"median_makespan_s", r.median_makespan},
                                   {"size", r.members.size()},
                                   {"prediction", r.prediction},
                                   {"rule", rule_to_json(r.rule)},
                                   {"members", r.members}});
    root["rows"] = json::array();
    for (std::size_t i = 0; i < model.row_y.size(); ++i)
        root["rows"].push_back(
            {model.row_config_index[i], model.row_region[i], model.row_y[i]});
    return root.dump(2) + "\n";
}

region_model parse_region_model(const std::string &json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception &e) {
        throw error(errc::parse_error, std::string("region model: ") + e.what());
    }
    region_model model;
    try {
        model.alpha_star = root.at("alpha_star").get<double>();
        model.seed = root.at("seed").get<std::uint64_t>();
        const auto &p = root.at("params");
        model.params.folds = p.at("folds").get<std::size_t>();
        model.params.repeats = p.at("repeats").get<std::size_t>();
        model.params.cart.min_leaf = p.at("min_leaf").get<std::size_t>();
        model.params.cart.max_depth = p.at("max_depth").get<std::size_t>();
        model.params.sep.g_floor = p.at("g_floor").get<double>();
        model.params.sep.g_cap = p.at("g_cap").get<double>();
        model.params.sep.delta = p.at("delta").get<double>();
        model.params.sep.min_leaf_eval = p.at("min_leaf_eval").get<std::size_t>();
        for (const auto &row : root.at("cv_report"))
            model.cv_report.push_back({row.at("alpha").get<double>(),
                                       row.at("mae_med").get<double>(),
                                       row.at("sep_med").get<double>(), row.at("j").get<double>()});
        for (const auto &c : root.at("columns")) {
            if (c.at("kind").get<std::string>() == "scale")
                model.columns.push_back({feature_column::scale, "", ""});
            else
                model.columns.push_back({feature_column::one_hot, c.at("stage").get<std::string>(),
                                         c.at("tier").get<std::string>()});
        }
        for (const auto &n : root.at("tree")) {
            cart_node node;
            node.col = n.at("col").get<int>();
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<int>();
            node.right = n.at("right").get<int>();
            node.prediction = n.at("prediction").get<double>();
            model.tree.nodes.push_back(std::move(node));
        }
        for (const auto &r : root.at("regions")) {
            region reg;
            reg.index = r.at("index").get<std::size_t>();
            reg.median_makespan = r.at("median_makespan_s").get<double>();
            reg.prediction = r.at("prediction").get<double>();
            reg.rule = rule_from_json(r.at("rule"));
            reg.members = r.at("members").get<std::vector<std::size_t>>();
            model.regions.push_back(std::move(reg));
        }
        for (const auto &row : root.at("rows")) {
            model.row_config_index.push_back(row.at(0).get<std::uint64_t>());
            model.row_region.push_back(row.at(1).get<std::size_t>());
            model.row_y.push_back(row.at(2).get<double>());
        }
    } catch (const json::exception &e) {
        throw error(errc::parse_error, std::string("region model: ") + e.what());
    }
    model.tree.total_rows = model.row_y.size();
    return model;
}

region_model load_region_model_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw error(errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_region_model(buf.str());
}

std::string membership_csv(const region_model &model) {
    std::ostringstream out;
    out << "config_index,region_index,makespan_s\n";
    for (std::size_t i = 0; i < model.row_y.size(); ++i)
        out << model.row_config_index[i] << ',' << model.row_region[i] << ','
            << format_double(model.row_y[i]) << '\n';
    return out.str();
}

} // namespace tierplan
