#pragma once

// Shared deterministic generators for the test suites. Everything is seeded
// and platform-pinned so failures reproduce from the printed seed alone.

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tierplan/config_space.hpp"
#include "tierplan/storage_profile.hpp"
#include "tierplan/workflow.hpp"

namespace tph {

using rng_t = std::mt19937_64;

inline std::uint64_t u64_below(rng_t &rng, std::uint64_t n) {
    // Rejection keeps the draw uniform without std::uniform_int_distribution,
    // whose output is not pinned across standard libraries.
    std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

inline std::uint64_t u64_in(rng_t &rng, std::uint64_t lo, std::uint64_t hi) {
    return lo + u64_below(rng, hi - lo + 1);
}

inline double real_in(rng_t &rng, double lo, double hi) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

inline tierplan::tier_catalog test_tiers() {
    return {{"tmpfs", tierplan::tier_class::local, 1},
            {"ssd", tierplan::tier_class::local, 2},
            {"beegfs", tierplan::tier_class::remote, 3}};
}

inline std::vector<std::string> tier_names(const tierplan::tier_catalog &tiers) {
    std::vector<std::string> out;
    for (const auto &t : tiers) out.push_back(t.name);
    return out;
}

inline tierplan::scaling_rule random_rule(rng_t &rng) {
    tierplan::scaling_rule r;
    switch (u64_below(rng, 4)) {
    case 0: r.kind = tierplan::rule_kind::constant; break;
    case 1: r.kind = tierplan::rule_kind::volume_linear_in_data_scale; break;
    case 2: r.kind = tierplan::rule_kind::volume_inverse_in_task_scale; break;
    default: r.kind = tierplan::rule_kind::access_size_fixed_volume_linear; break;
    }
    r.base_access_size = u64_in(rng, 1, 1 << 20);
    r.base_volume = u64_in(rng, r.base_access_size, r.base_access_size * 4096);
    r.base_access_count = (r.base_volume + r.base_access_size - 1) / r.base_access_size;
    return r;
}

// Random valid template: every level-0 stage reads from the source, every
// stage writes somewhere downstream (a later level or the sink), and stages
// past level 0 read from some earlier stage.
inline tierplan::workflow_template random_template(rng_t &rng, std::size_t max_levels = 4,
                                                   std::size_t max_per_level = 3) {
    tierplan::workflow_template t;
    t.name = "random";
    t.tiers = test_tiers();
    auto names = tier_names(t.tiers);
    t.initial_data_tier = names[u64_below(rng, names.size())];
    t.final_data_tier = names[u64_below(rng, names.size())];

    std::size_t levels = u64_in(rng, 1, max_levels);
    std::vector<std::vector<std::string>> by_level(levels);
    int counter = 0;
    for (std::size_t l = 0; l < levels; ++l) {
        std::size_t n = u64_in(rng, 1, max_per_level);
        for (std::size_t i = 0; i < n; ++i) {
            std::string name = "s" + std::to_string(counter++) + "_l" + std::to_string(l);
            by_level[l].push_back(name);
            t.stages.push_back({name, static_cast<int>(l), names});
        }
    }

    auto pat = [&] {
        return u64_below(rng, 2) == 0 ? tierplan::access_pattern::sequential
                                      : tierplan::access_pattern::random_access;
    };
    for (const auto &s : by_level[0])
        t.edges.push_back({tierplan::external_source, s, random_rule(rng), pat()});
    for (std::size_t l = 1; l < levels; ++l)
        for (const auto &s : by_level[l]) {
            std::size_t src_level = u64_below(rng, l);
            const auto &pool = by_level[src_level];
            t.edges.push_back({pool[u64_below(rng, pool.size())], s, random_rule(rng), pat()});
        }
    for (std::size_t l = 0; l < levels; ++l)
        for (const auto &s : by_level[l]) {
            if (l + 1 < levels && u64_below(rng, 2) == 0) {
                std::size_t dst_level = u64_in(rng, l + 1, levels - 1);
                const auto &pool = by_level[dst_level];
                t.edges.push_back({s, pool[u64_below(rng, pool.size())], random_rule(rng), pat()});
            } else {
                t.edges.push_back({s, tierplan::external_sink, random_rule(rng), pat()});
            }
        }
    return t;
}

// Profile with an exact-match record for every query the evaluator can make
// against this dag, at uniformly drawn rates. No interpolation is involved,
// so an independent table scan reproduces every lookup.
inline tierplan::storage_profile exact_profile(rng_t &rng, const tierplan::projected_dag &dag,
                                               std::uint64_t tpn) {
    tierplan::storage_profile p;
    std::set<std::tuple<std::string, int, int, std::uint64_t, std::uint64_t, std::uint64_t,
                        std::uint64_t>>
        seen;
    auto add = [&](const std::string &tier, tierplan::io_type io, const tierplan::edge_props &e,
                   std::uint64_t use_tpn) {
        auto key = std::make_tuple(tier, static_cast<int>(io), static_cast<int>(e.pattern),
                                   static_cast<std::uint64_t>(dag.scale.task_scale), use_tpn,
                                   e.access_size, e.volume);
        if (!seen.insert(key).second) return;
        tierplan::profile_record r;
        r.tier = tier;
        r.io = io;
        r.pattern = e.pattern;
        r.nodes = static_cast<std::uint64_t>(dag.scale.task_scale);
        r.tpn = use_tpn;
        r.transfer_size = e.access_size;
        r.total_size = e.volume;
        r.rate = static_cast<double>(u64_in(rng, 1000000, 1000000000));
        p.records.push_back(r);
    };
    for (const auto &e : dag.edges)
        for (const auto &t : dag.tiers) {
            add(t.name, tierplan::io_type::read, e.props, tpn);
            add(t.name, tierplan::io_type::write, e.props, tpn);
            add(t.name, tierplan::io_type::copy_in, e.props, 1);
            add(t.name, tierplan::io_type::copy_out, e.props, 1);
        }
    return p;
}

inline tierplan::assignment random_assignment(rng_t &rng, const tierplan::projected_dag &dag,
                                              std::uint64_t tpn) {
    tierplan::assignment asg;
    asg.tpn = tpn;
    for (const auto &s : dag.stages) {
        const auto &cand = dag.candidates.at(s.name);
        asg.tier_of[s.name] = cand[u64_below(rng, cand.size())];
    }
    return asg;
}

} // namespace tph
