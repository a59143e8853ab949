#include "tierplan/qos.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tierplan {

using json = nlohmann::ordered_json;

namespace {

const scale_dataset &pick_dataset(const qos_query &q, std::span<const scale_dataset> data,
                                  std::optional<int> scale) {
    if (data.empty()) throw error(errc::missing_scale_data, "no evaluated tables supplied");
    if (!scale) {
        if (data.size() == 1) return data.front();
        throw error(errc::missing_scale_data, "query names no scale but several tables are loaded");
    }
    for (const auto &d : data)
        if (d.task_scale == *scale) return d;
    throw error(errc::missing_scale_data, "no evaluated table for scale " + std::to_string(*scale));
}

bool uses_only(const assignment &asg, const std::set<std::string> &allowed) {
    for (const auto &[stage, tier] : asg.tier_of)
        if (!allowed.count(tier)) return false;
    return true;
}

bool avoids_all(const assignment &asg, const std::set<std::string> &banned) {
    for (const auto &[stage, tier] : asg.tier_of)
        if (banned.count(tier)) return false;
    return true;
}

std::size_t region_of(const scale_dataset &d, std::uint64_t config_index) {
    if (!d.model) return 0;
    for (std::size_t r = 0; r < d.model->row_config_index.size(); ++r)
        if (d.model->row_config_index[r] == config_index) return d.model->row_region[r];
    return 0;
}

placement to_placement(const scale_dataset &d, const evaluated_config &c) {
    placement p;
    p.task_scale = d.task_scale;
    p.asg = c.asg;
    p.makespan = c.makespan;
    p.region_index = region_of(d, c.index);
    return p;
}

// Same-region alternatives obeying the query's own feasibility test.
std::vector<placement> alternatives_for(const scale_dataset &d, const evaluated_config &chosen,
                                        std::size_t top_k,
                                        const std::function<bool(const evaluated_config &)> &ok) {
    std::vector<placement> out;
    if (!d.model || top_k == 0) return out;
    std::size_t reg = region_of(d, chosen.index);
    std::vector<const evaluated_config *> pool;
    for (const auto &c : d.configs) {
        if (c.index == chosen.index) continue;
        if (region_of(d, c.index) != reg) continue;
        if (!ok(c)) continue;
        pool.push_back(&c);
    }
    std::stable_sort(pool.begin(), pool.end(), [](const auto *a, const auto *b) {
        return a->makespan < b->makespan || (a->makespan == b->makespan && a->index < b->index);
    });
    for (const auto *c : pool) {
        if (out.size() == top_k) break;
        out.push_back(to_placement(d, *c));
    }
    return out;
}

std::string join(const std::vector<std::string> &parts) {
    std::string s;
    for (const auto &p : parts) {
        if (!s.empty()) s += ", ";
        s += p;
    }
    return s.empty() ? "(none)" : s;
}

const evaluated_config *min_config(const std::vector<evaluated_config> &configs,
                                   const std::function<bool(const evaluated_config &)> &ok) {
    const evaluated_config *best = nullptr;
    for (const auto &c : configs)
        if (ok(c) && (!best || c.makespan < best->makespan)) best = &c;
    return best;
}

} // namespace

recommendation answer(const qos_query &query, std::span<const scale_dataset> data) {
    recommendation rec;
    auto note = [&](std::string line) { rec.rationale.push_back(std::move(line)); };

    switch (query.kind) {
    case query_kind::best_under_node_cap: {
        std::vector<int> scales;
        for (int n : query.candidate_nodes)
            if (query.max_nodes <= 0 || n <= query.max_nodes) scales.push_back(n);
        note("node counts considered: " + std::to_string(scales.size()) + " of " +
             std::to_string(query.candidate_nodes.size()) + " candidates within cap " +
             std::to_string(query.max_nodes));
        if (scales.empty()) {
            rec.matched = false;
            rec.denial_reason = "empty_feasible_set";
            note("every candidate node count exceeds the cap");
            return rec;
        }
        const scale_dataset *best_d = nullptr;
        const evaluated_config *best_c = nullptr;
        for (int s : scales) {
            const auto &d = pick_dataset(query, data, s);
            const auto *c = min_config(d.configs, [](const evaluated_config &) { return true; });
            if (!c) continue;
            note("scale " + std::to_string(s) + ": best makespan " + format_double(c->makespan) +
                 " s over " + std::to_string(d.configs.size()) + " configs");
            if (!best_c || c->makespan < best_c->makespan) {
                best_c = c;
                best_d = &d;
            }
        }
        if (!best_c) {
            rec.matched = false;
            rec.denial_reason = "empty_feasible_set";
            return rec;
        }
        rec.matched = true;
        rec.chosen = to_placement(*best_d, *best_c);
        rec.alternatives = alternatives_for(*best_d, *best_c, query.top_k,
                                            [](const evaluated_config &) { return true; });
        note("picked scale " + std::to_string(best_d->task_scale) + ", region " +
             std::to_string(rec.chosen->region_index));
        return rec;
    }
    case query_kind::best_within_tiers: {
        const auto &d = pick_dataset(query, data, query.scale);
        std::set<std::string> allowed(query.allowed_tiers.begin(), query.allowed_tiers.end());
        auto ok = [&](const evaluated_config &c) { return uses_only(c.asg, allowed); };
        std::size_t feasible = 0;
        for (const auto &c : d.configs) feasible += ok(c) ? 1 : 0;
        note("allowed tiers: " + join(query.allowed_tiers) + "; " + std::to_string(feasible) +
             " of " + std::to_string(d.configs.size()) + " configs qualify");
        const auto *c = min_config(d.configs, ok);
        if (!c) {
            rec.matched = false;
            rec.denial_reason = "empty_feasible_set";
            note("no configuration keeps every stage inside the allow list");
            return rec;
        }
        rec.matched = true;
        rec.chosen = to_placement(d, *c);
        rec.alternatives = alternatives_for(d, *c, query.top_k, ok);
        return rec;
    }
    case query_kind::deadline_excluding: {
        const auto &d = pick_dataset(query, data, query.scale);
        std::set<std::string> banned(query.excluded_tiers.begin(), query.excluded_tiers.end());
        auto ok = [&](const evaluated_config &c) { return avoids_all(c.asg, banned); };
        std::size_t feasible = 0;
        for (const auto &c : d.configs) feasible += ok(c) ? 1 : 0;
        note("excluded tiers: " + join(query.excluded_tiers) + "; " + std::to_string(feasible) +
             " of " + std::to_string(d.configs.size()) + " configs remain");
        const auto *c = min_config(d.configs, ok);
        if (!c) {
            rec.matched = false;
            rec.denial_reason = "empty_feasible_set";
            note("exclusions leave no configuration at all");
            return rec;
        }
        note("best remaining makespan " + format_double(c->makespan) + " s against deadline " +
             format_double(query.deadline_s) + " s");
        if (c->makespan > query.deadline_s) {
            rec.matched = false;
            rec.denial_reason = "deadline_miss";
            rec.deadline_gap_s = c->makespan - query.deadline_s;
            note("deadline missed by " + format_double(rec.deadline_gap_s) +
                 " s; relaxing the deadline by that gap admits the configuration");
            return rec;
        }
        rec.matched = true;
        rec.chosen = to_placement(d, *c);
        rec.alternatives = alternatives_for(d, *c, query.top_k, [&](const evaluated_config &cc) {
            return ok(cc) && cc.makespan <= query.deadline_s;
        });
        return rec;
    }
    case query_kind::tier_unavailable: {
        const auto &d = pick_dataset(query, data, query.scale);
        std::set<std::string> banned(query.excluded_tiers.begin(), query.excluded_tiers.end());
        auto ok = [&](const evaluated_config &c) { return avoids_all(c.asg, banned); };
        std::size_t feasible = 0;
        for (const auto &c : d.configs) feasible += ok(c) ? 1 : 0;
        note("unavailable tiers: " + join(query.excluded_tiers) + "; " + std::to_string(feasible) +
             " of " + std::to_string(d.configs.size()) + " configs still placeable");
        const auto *c = min_config(d.configs, ok);
        if (!c) {
            rec.matched = false;
            rec.denial_reason = "empty_feasible_set";
            note("every configuration touches an unavailable tier");
            return rec;
        }
        rec.matched = true;
        rec.chosen = to_placement(d, *c);
        rec.alternatives = alternatives_for(d, *c, query.top_k, ok);
        return rec;
    }
    }
    throw error(errc::parse_error, "unhandled query kind");
}

namespace {

query_kind parse_kind(const std::string &s) {
    if (s == "best_under_node_cap") return query_kind::best_under_node_cap;
    if (s == "best_within_tiers") return query_kind::best_within_tiers;
    if (s == "deadline_excluding") return query_kind::deadline_excluding;
    if (s == "tier_unavailable") return query_kind::tier_unavailable;
    throw error(errc::parse_error, "unknown query kind '" + s + "'");
}

const char *kind_name(query_kind k) {
    switch (k) {
    case query_kind::best_under_node_cap: return "best_under_node_cap";
    case query_kind::best_within_tiers: return "best_within_tiers";
    case query_kind::deadline_excluding: return "deadline_excluding";
    case query_kind::tier_unavailable: return "tier_unavailable";
    }
    return "best_within_tiers";
}

} // namespace

qos_query parse_query(const std::string &json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception &e) {
        throw error(errc::parse_error, std::string("query: ") + e.what());
    }
    static const std::set<std::string> known = {"kind",          "candidate_nodes", "max_nodes",
                                                "allowed_tiers", "excluded_tiers",  "deadline_s",
                                                "scale",         "top_k"};
    for (auto it = root.begin(); it != root.end(); ++it)
        if (!known.count(it.key()))
            throw error(errc::parse_error, "query: unknown key '" + it.key() + "'");
    if (!root.contains("kind") || !root["kind"].is_string())
        throw error(errc::parse_error, "query: missing string 'kind'");

    qos_query q;
    q.kind = parse_kind(root["kind"].get<std::string>());
    if (root.contains("candidate_nodes"))
        q.candidate_nodes = root["candidate_nodes"].get<std::vector<int>>();
    if (root.contains("max_nodes")) q.max_nodes = root["max_nodes"].get<int>();
    if (root.contains("allowed_tiers"))
        q.allowed_tiers = root["allowed_tiers"].get<std::vector<std::string>>();
    if (root.contains("excluded_tiers"))
        q.excluded_tiers = root["excluded_tiers"].get<std::vector<std::string>>();
    if (root.contains("deadline_s")) q.deadline_s = root["deadline_s"].get<double>();
    if (root.contains("scale")) q.scale = root["scale"].get<int>();
    if (root.contains("top_k")) q.top_k = root["top_k"].get<std::size_t>();

    switch (q.kind) {
    case query_kind::best_under_node_cap:
        if (q.candidate_nodes.empty())
            throw error(errc::parse_error, "query: best_under_node_cap needs candidate_nodes");
        break;
    case query_kind::best_within_tiers:
        if (q.allowed_tiers.empty())
            throw error(errc::parse_error, "query: best_within_tiers needs allowed_tiers");
        break;
    case query_kind::deadline_excluding:
        if (q.deadline_s <= 0.0)
            throw error(errc::parse_error, "query: deadline_excluding needs a positive deadline_s");
        break;
    case query_kind::tier_unavailable:
        if (q.excluded_tiers.empty())
            throw error(errc::parse_error, "query: tier_unavailable needs excluded_tiers");
        break;
    }
    return q;
}

qos_query load_query_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw error(errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_query(buf.str());
}

namespace {

json placement_to_json(const placement &p) {
    json asg = json::object();
    for (const auto &[stage, tier] : p.asg.tier_of) asg[stage] = tier;
    return {{"task_scale", p.task_scale},
            {"assignment", asg},
            {"tpn", p.asg.tpn},
            {"makespan_s", p.makespan},
            {"region_index", p.region_index}};
}

} // namespace

std::string serialize_recommendation(const recommendation &rec) {
    json root;
    root["status"] = rec.matched ? "matched" : "denied";
    root["chosen"] = rec.chosen ? placement_to_json(*rec.chosen) : json(nullptr);
    root["alternatives"] = json::array();
    for (const auto &p : rec.alternatives) root["alternatives"].push_back(placement_to_json(p));
    root["rationale"] = rec.rationale;
    if (rec.matched) {
        root["denial"] = nullptr;
    } else {
        root["denial"] = {{"reason", rec.denial_reason}};
        if (rec.denial_reason == "deadline_miss")
            root["denial"]["deadline_gap_s"] = rec.deadline_gap_s;
    }
    return root.dump(2) + "\n";
}

namespace {

// Rewrites one bucket so the left-to-right sum ((a + b) + c) lands exactly on
// target, moving that bucket by at most a few ulps of the total. For each
// bucket in turn the replacement is derived by subtraction, which is exact
// (Sterbenz) whenever the other two terms stay within a factor of two of the
// target; a short ulp search around the candidate mops up the rest. Buckets
// never go negative.
void pin_three_sum(double &a, double &b, double &c, double target) {
    if (target - ((a + b) + c) == 0.0) return;
    double *slots[3] = {&c, &b, &a};
    double cand[3] = {target - (a + b), (target - c) - a, (target - c) - b};
    for (int i = 0; i < 3; ++i) {
        double *p = slots[i];
        double saved = *p;
        for (int k : {0, 1, -1, 2, -2, 3, -3, 4, -4}) {
            double v = cand[i];
            for (int step = 0; step < k; ++step)
                v = std::nextafter(v, std::numeric_limits<double>::infinity());
            for (int step = 0; step > k; --step)
                v = std::nextafter(v, -std::numeric_limits<double>::infinity());
            if (v < 0.0) continue;
            *p = v;
            if (target - ((a + b) + c) == 0.0) return;
        }
        *p = saved;
    }
}

} // namespace

cost_composition_result cost_composition(const evaluated_config &config,
                                         const tier_catalog &tiers) {
    cost_composition_result out;
    for (const auto &e : config.trace) {
        if (e.component != phase::execution) {
            out.movement_s += e.seconds;
        } else if (find_tier(tiers, e.tier).cls == tier_class::remote) {
            out.shared_io_s += e.seconds;
        } else {
            out.local_io_s += e.seconds;
        }
    }
    pin_three_sum(out.movement_s, out.shared_io_s, out.local_io_s, config.makespan);
    if (config.makespan > 0.0) {
        out.movement_share = out.movement_s / config.makespan;
        out.shared_io_share = out.shared_io_s / config.makespan;
        out.local_io_share = out.local_io_s / config.makespan;
        pin_three_sum(out.movement_share, out.shared_io_share, out.local_io_share, 1.0);
    }
    return out;
}

sensitivity_report sensitivity_classify(const std::vector<evaluated_config> &configs,
                                        const region_model &model, double epsilon) {
    sensitivity_report rep;
    rep.epsilon = epsilon;

    auto universe = [&] {
        std::vector<std::pair<std::string, std::vector<std::string>>> u;
        for (const auto &c : model.columns) {
            if (c.kind != feature_column::one_hot) continue;
            if (u.empty() || u.back().first != c.stage) u.push_back({c.stage, {}});
            u.back().second.push_back(c.tier);
        }
        return u;
    }();

    std::map<std::uint64_t, const evaluated_config *> by_index;
    for (const auto &c : configs) by_index[c.index] = &c;

    std::map<std::string, std::map<std::string, bool>> overall_dont_care;

    for (const auto &r : model.regions) {
        region_sensitivity rs;
        rs.region_index = r.index;
        std::vector<const evaluated_config *> members;
        for (auto m : r.members) {
            auto it = by_index.find(model.row_config_index[m]);
            if (it == by_index.end())
                throw error(errc::length_mismatch,
                            "no evaluated config for model row " + std::to_string(m));
            members.push_back(it->second);
        }
        for (const auto &[stage, full_set] : universe) {
            stage_sensitivity ss;
            ss.stage = stage;
            const std::vector<std::string> *allowed = nullptr;
            for (const auto &[s, tiers] : r.rule.admissible)
                if (s == stage) allowed = &tiers;
            bool full = allowed && allowed->size() == full_set.size();

            std::map<std::string, std::pair<double, double>> groups; // rest-key -> (min,max)
            for (const auto *c : members) {
                std::string key;
                for (const auto &[s, t] : c->asg.tier_of)
                    if (s != stage) key += s + ":" + t + ";";
                auto [it, fresh] = groups.try_emplace(key, c->makespan, c->makespan);
                if (!fresh) {
                    it->second.first = std::min(it->second.first, c->makespan);
                    it->second.second = std::max(it->second.second, c->makespan);
                }
            }
            double swing = 0.0;
            for (const auto &[key, mm] : groups) swing = std::max(swing, mm.second - mm.first);
            ss.max_rel_swing = r.median_makespan > 0.0 ? swing / r.median_makespan : 0.0;
            ss.dont_care = full && ss.max_rel_swing < epsilon;
            overall_dont_care[stage][std::to_string(r.index)] = ss.dont_care;
            rs.stages.push_back(std::move(ss));
        }
        rep.regions.push_back(std::move(rs));
    }

    for (const auto &[stage, per_region] : overall_dont_care) {
        stage_sensitivity ss;
        ss.stage = stage;
        ss.dont_care = true;
        for (const auto &[idx, dc] : per_region) ss.dont_care = ss.dont_care && dc;
        for (const auto &rs : rep.regions)
            for (const auto &s : rs.stages)
                if (s.stage == stage) ss.max_rel_swing = std::max(ss.max_rel_swing, s.max_rel_swing);
        rep.overall.push_back(std::move(ss));
    }

    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto &c : configs) {
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto &e : c.trace) seen.insert({e.stage, e.tier});
        for (const auto &p : seen) ++counts[p];
    }
    for (const auto &[p, n] : counts)
        rep.trace_frequency.push_back(
            {p.first, p.second, static_cast<double>(n) / static_cast<double>(configs.size())});
    return rep;
}

robustness_report robustness(const evaluated_config &config, const projected_dag &dag,
                             const storage_profile &profile, double rho,
                             std::span<const double> population_makespans) {
    robustness_report rep;
    auto times = component_times(dag, config.asg, profile);

    auto value_of = [&](const std::string &stage, phase c) {
        const auto &ct = times.at(stage);
        return c == phase::stage_in ? ct.stage_in
               : c == phase::execution ? ct.execution
                                       : ct.stage_out;
    };
    // Straggler under a single substituted value, same tie rule as evaluation.
    auto argmax_with = [&](const std::vector<std::string> &stages, phase c,
                           const std::string &subst_stage, double subst_value) {
        std::string best_stage;
        double best = 0.0;
        bool first = true;
        for (const auto &s : stages) {
            double v = s == subst_stage ? subst_value : value_of(s, c);
            if (first || v > best) {
                best = v;
                best_stage = s;
                first = false;
            }
        }
        return std::make_pair(best_stage, best);
    };

    for (const auto &lvl : dag.levels) {
        auto sorted = lvl;
        std::sort(sorted.begin(), sorted.end());
        for (phase c : {phase::stage_in, phase::execution, phase::stage_out}) {
            auto [base_stage, base_max] = argmax_with(sorted, c, "", 0.0);
            for (const auto &s : sorted) {
                double v = value_of(s, c);
                for (double factor : {1.0 + rho, 1.0 - rho}) {
                    auto [new_stage, new_max] = argmax_with(sorted, c, s, v * factor);
                    if (new_stage != base_stage) rep.trace_stable = false;
                    rep.worst_case_delta_s =
                        std::max(rep.worst_case_delta_s, std::abs(new_max - base_max));
                }
            }
        }
    }
    rep.worst_case_rel_delta =
        config.makespan > 0.0 ? rep.worst_case_delta_s / config.makespan : 0.0;

    if (!population_makespans.empty()) {
        rep.rank_bound_known = true;
        std::size_t near = 0;
        for (double m : population_makespans)
            if (std::abs(m - config.makespan) <= rep.worst_case_delta_s) ++near;
        rep.rank_shift_bound = near > 0 ? near - 1 : 0;
    }
    return rep;
}

} // namespace tierplan
