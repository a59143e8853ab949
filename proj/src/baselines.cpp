#include "tierplan/baselines.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace tierplan {

namespace {

std::pair<int, int> fast_tier_counts(const evaluated_config &c, const tier_catalog &tiers) {
    int rank1 = 0, rank2 = 0;
    for (const auto &[stage, tier] : c.asg.tier_of) {
        int rank = find_tier(tiers, tier).speed_rank;
        if (rank == 1) ++rank1;
        else if (rank == 2) ++rank2;
    }
    return {rank1, rank2};
}

ordering sorted_order(std::size_t n, const std::function<bool(std::size_t, std::size_t)> &less) {
    ordering idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), less);
    return idx;
}

} // namespace

std::size_t transition_count(const projected_dag &dag, const assignment &asg) {
    std::size_t n = 0;
    for (const auto &e : dag.edges) {
        const std::string &from_tier =
            e.from == external_source ? dag.initial_data_tier : asg.tier_of.at(e.from);
        const std::string &to_tier =
            e.to == external_sink ? dag.final_data_tier : asg.tier_of.at(e.to);
        if (from_tier != to_tier) ++n;
    }
    return n;
}

ordering order_fsf(const std::vector<evaluated_config> &configs, const tier_catalog &tiers) {
    std::vector<std::tuple<int, int, std::uint64_t>> key(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
        auto [r1, r2] = fast_tier_counts(configs[i], tiers);
        key[i] = {-r1, -r2, configs[i].index};
    }
    return sorted_order(configs.size(),
                        [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
}

ordering order_ltl(const std::vector<evaluated_config> &configs, const projected_dag &dag) {
    std::vector<std::pair<std::size_t, std::uint64_t>> key(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i)
        key[i] = {transition_count(dag, configs[i].asg), configs[i].index};
    return sorted_order(configs.size(),
                        [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
}

ordering order_hybrid(const std::vector<evaluated_config> &configs, const projected_dag &dag) {
    std::vector<double> fsf(configs.size()), ltl(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
        auto [r1, r2] = fast_tier_counts(configs[i], dag.tiers);
        fsf[i] = 2.0 * r1 + 1.0 * r2;
        ltl[i] = static_cast<double>(transition_count(dag, configs[i].asg));
    }
    auto norm = [](std::vector<double> &v) {
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        double min = *lo, max = *hi;
        for (auto &x : v) x = max > min ? (x - min) / (max - min) : 0.0;
    };
    norm(fsf);
    norm(ltl);
    std::vector<std::pair<double, std::uint64_t>> key(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i)
        key[i] = {ltl[i] - fsf[i], configs[i].index}; // ascending == combined descending
    return sorted_order(configs.size(),
                        [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
}

ordering order_region_model(const region_model &model,
                            const std::vector<evaluated_config> &configs) {
    std::map<std::uint64_t, std::size_t> row_of;
    for (std::size_t r = 0; r < model.row_config_index.size(); ++r)
        row_of[model.row_config_index[r]] = r;
    std::vector<std::tuple<std::size_t, double, std::uint64_t>> key(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
        auto it = row_of.find(configs[i].index);
        if (it == row_of.end())
            throw error(errc::length_mismatch,
                        "model has no row for config " + std::to_string(configs[i].index));
        std::size_t reg = model.row_region[it->second];
        key[i] = {reg, model.regions[reg].prediction, configs[i].index};
    }
    return sorted_order(configs.size(),
                        [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
}

double pairwise_concordance(const ordering &order, const std::vector<double> &makespans) {
    const std::size_t n = makespans.size();
    if (order.size() != n)
        throw error(errc::length_mismatch, "ordering and makespan count differ");
    if (n < 2)
        throw error(errc::too_few_rows, "concordance needs at least 2 configurations");
    std::vector<std::size_t> rank(n, n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        if (order[pos] >= n || rank[order[pos]] != n)
            throw error(errc::length_mismatch, "ordering is not a permutation");
        rank[order[pos]] = pos;
    }
    double score = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (makespans[i] == makespans[j]) {
                score += 0.5;
            } else if ((rank[i] < rank[j]) == (makespans[i] < makespans[j])) {
                score += 1.0;
            }
        }
    return score / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

} // namespace tierplan
