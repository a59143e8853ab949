#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "tierplan/qos.hpp"

using namespace tierplan;

namespace {

bool same_bits(double a, double b) {
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

evaluated_config cfg(std::uint64_t index, std::map<std::string, std::string> tiers,
                     double makespan) {
    evaluated_config c;
    c.index = index;
    c.asg.tier_of = std::move(tiers);
    c.asg.tpn = 1;
    c.makespan = makespan;
    return c;
}

// Ascending-makespan table over two stages and the standard tier trio.
std::vector<evaluated_config> toy_table(tph::rng_t &rng, std::size_t n) {
    std::vector<std::string> tiers = {"tmpfs", "ssd", "beegfs"};
    std::vector<evaluated_config> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(cfg(i, {{"a", tiers[tph::u64_below(rng, 3)]},
                              {"b", tiers[tph::u64_below(rng, 3)]}},
                          tph::real_in(rng, 1.0, 100.0)));
    std::sort(out.begin(), out.end(), [](const auto &x, const auto &y) {
        return x.makespan < y.makespan;
    });
    return out;
}

std::set<std::string> tiers_used(const assignment &asg) {
    std::set<std::string> s;
    for (const auto &[stage, tier] : asg.tier_of) s.insert(tier);
    return s;
}

} // namespace

TEST_CASE("node-cap queries pick the best table within the cap") {
    std::vector<scale_dataset> data(3);
    data[0].task_scale = 2;
    data[0].configs = {cfg(0, {{"a", "ssd"}}, 10.0), cfg(1, {{"a", "beegfs"}}, 12.0)};
    data[1].task_scale = 4;
    data[1].configs = {cfg(0, {{"a", "ssd"}}, 6.0), cfg(1, {{"a", "beegfs"}}, 9.0)};
    data[2].task_scale = 8;
    data[2].configs = {cfg(0, {{"a", "ssd"}}, 4.0), cfg(1, {{"a", "beegfs"}}, 7.0)};

    qos_query q;
    q.kind = query_kind::best_under_node_cap;
    q.candidate_nodes = {2, 4, 8};
    q.max_nodes = 8;
    auto rec = answer(q, data);
    REQUIRE(rec.matched);
    CHECK(rec.chosen->task_scale == 8);
    CHECK(rec.chosen->makespan == 4.0);
    CHECK(!rec.rationale.empty());

    q.max_nodes = 5;
    rec = answer(q, data);
    REQUIRE(rec.matched);
    CHECK(rec.chosen->task_scale == 4);
    CHECK(rec.chosen->makespan == 6.0);

    q.max_nodes = 1;
    rec = answer(q, data);
    CHECK(rec.matched == false);
    CHECK(rec.denial_reason == "empty_feasible_set");
}

TEST_CASE("scale selection errors name the missing table") {
    std::vector<scale_dataset> data(1);
    data[0].task_scale = 2;
    data[0].configs = {cfg(0, {{"a", "ssd"}}, 10.0)};

    qos_query q;
    q.kind = query_kind::best_within_tiers;
    q.allowed_tiers = {"ssd"};
    q.scale = 4;
    try {
        answer(q, data);
        CHECK(false);
    } catch (const error &e) {
        CHECK(e.code() == errc::missing_scale_data);
        CHECK(std::string(e.what()).find("4") != std::string::npos);
    }

    std::vector<scale_dataset> both(2);
    both[0].task_scale = 2;
    both[0].configs = data[0].configs;
    both[1].task_scale = 4;
    both[1].configs = data[0].configs;
    q.scale.reset();
    CHECK_THROWS_AS(answer(q, both), error);
    CHECK_THROWS_AS(answer(q, std::vector<scale_dataset>{}), error);
}

TEST_CASE("allow-list answers never leave the list") {
    tph::rng_t rng(801);
    std::vector<std::string> tiers = {"tmpfs", "ssd", "beegfs"};
    for (int iter = 0; iter < 200; ++iter) {
        CAPTURE(iter);
        std::vector<scale_dataset> data(1);
        data[0].task_scale = 4;
        data[0].configs = toy_table(rng, tph::u64_in(rng, 1, 20));

        qos_query q;
        q.kind = query_kind::best_within_tiers;
        q.scale = 4;
        std::size_t take = tph::u64_in(rng, 1, 3);
        for (std::size_t i = 0; i < take; ++i) q.allowed_tiers.push_back(tiers[i]);
        auto rec = answer(q, data);

        std::set<std::string> allowed(q.allowed_tiers.begin(), q.allowed_tiers.end());
        double best_feasible = -1.0;
        for (const auto &c : data[0].configs) {
            const auto used = tiers_used(c.asg);
            bool ok = std::includes(allowed.begin(), allowed.end(), used.begin(), used.end());
            if (ok && best_feasible < 0.0) best_feasible = c.makespan;
        }
        if (best_feasible < 0.0) {
            CHECK(rec.matched == false);
            CHECK(rec.denial_reason == "empty_feasible_set");
            CHECK(!rec.chosen.has_value());
        } else {
            REQUIRE(rec.matched);
            CHECK(rec.chosen->makespan == best_feasible);
            for (const auto &t : tiers_used(rec.chosen->asg)) CHECK(allowed.count(t) == 1);
        }
    }
}

TEST_CASE("deadline denials carry the gap and relaxing by it flips the answer") {
    tph::rng_t rng(802);
    for (int iter = 0; iter < 200; ++iter) {
        CAPTURE(iter);
        std::vector<scale_dataset> data(1);
        data[0].task_scale = 4;
        data[0].configs = toy_table(rng, tph::u64_in(rng, 2, 20));

        qos_query q;
        q.kind = query_kind::deadline_excluding;
        q.scale = 4;
        q.excluded_tiers = {"tmpfs"};
        std::set<std::string> banned(q.excluded_tiers.begin(), q.excluded_tiers.end());

        double best_feasible = -1.0;
        for (const auto &c : data[0].configs) {
            bool ok = true;
            for (const auto &t : tiers_used(c.asg)) ok = ok && !banned.count(t);
            if (ok && best_feasible < 0.0) best_feasible = c.makespan;
        }
        if (best_feasible < 0.0) continue;

        // a deadline below the best feasible makespan must be denied; staying
        // above half of it keeps the gap arithmetic exact
        q.deadline_s = best_feasible * tph::real_in(rng, 0.5, 0.95);
        auto denied = answer(q, data);
        CHECK(denied.matched == false);
        CHECK(denied.denial_reason == "deadline_miss");
        CHECK(denied.deadline_gap_s > 0.0);
        CHECK(denied.deadline_gap_s ==
              doctest::Approx(best_feasible - q.deadline_s).epsilon(1e-12));

        q.deadline_s += denied.deadline_gap_s;
        auto granted = answer(q, data);
        REQUIRE(granted.matched);
        CHECK(granted.chosen->makespan == best_feasible);
        CHECK(granted.chosen->makespan <= q.deadline_s);
    }
}

TEST_CASE("outage answers never beat the unconstrained optimum") {
    tph::rng_t rng(803);
    for (int iter = 0; iter < 200; ++iter) {
        CAPTURE(iter);
        std::vector<scale_dataset> data(1);
        data[0].task_scale = 4;
        data[0].configs = toy_table(rng, tph::u64_in(rng, 2, 20));

        qos_query q;
        q.kind = query_kind::tier_unavailable;
        q.scale = 4;
        q.excluded_tiers = {"ssd"};
        auto rec = answer(q, data);
        if (!rec.matched) {
            CHECK(rec.denial_reason == "empty_feasible_set");
            continue;
        }
        CHECK(rec.chosen->makespan >= data[0].configs.front().makespan);
        CHECK(tiers_used(rec.chosen->asg).count("ssd") == 0);
        for (const auto &alt : rec.alternatives) {
            CHECK(tiers_used(alt.asg).count("ssd") == 0);
            CHECK(alt.makespan >= rec.chosen->makespan);
        }
    }
}

TEST_CASE("query JSON parsing is strict") {
    CHECK_THROWS_AS(parse_query(""), error);
    CHECK_THROWS_AS(parse_query("{}"), error);
    CHECK_THROWS_AS(parse_query(R"({"kind": "spelunking"})"), error);
    CHECK_THROWS_AS(parse_query(R"({"kind": "best_within_tiers", "bogus": 1})"), error);
    CHECK_THROWS_AS(parse_query(R"({"kind": "best_within_tiers"})"), error);
    CHECK_THROWS_AS(parse_query(R"({"kind": "best_under_node_cap"})"), error);
    CHECK_THROWS_AS(parse_query(R"({"kind": "deadline_excluding", "deadline_s": 0})"), error);
    CHECK_THROWS_AS(parse_query(R"({"kind": "tier_unavailable"})"), error);

    auto q = parse_query(
        R"({"kind": "deadline_excluding", "deadline_s": 2.5, "excluded_tiers": ["tmpfs"], "scale": 4, "top_k": 2})");
    CHECK(q.kind == query_kind::deadline_excluding);
    CHECK(q.deadline_s == 2.5);
    CHECK(q.excluded_tiers == std::vector<std::string>{"tmpfs"});
    CHECK(q.scale == 4);
    CHECK(q.top_k == 2);
}

TEST_CASE("cost composition buckets the trace and pins the sums") {
    evaluated_config c;
    c.asg.tpn = 1;
    c.trace = {
        {0, phase::stage_in, "a", "beegfs", 2.0},
        {0, phase::execution, "a", "tmpfs", 5.0},
        {0, phase::stage_out, "a", "beegfs", 2.0},
    };
    c.makespan = 9.0;
    auto r = cost_composition(c, tph::test_tiers());
    CHECK(r.movement_s == 4.0);
    CHECK(r.local_io_s == 5.0);
    CHECK(r.shared_io_s == 0.0);
    CHECK(r.movement_share == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
    CHECK(r.movement_s + r.shared_io_s + r.local_io_s == 9.0);
    CHECK(r.movement_share + r.shared_io_share + r.local_io_share == 1.0);
}

TEST_CASE("cost composition sums exactly for real evaluations") {
    tph::rng_t rng(804);
    for (int iter = 0; iter < 200; ++iter) {
        CAPTURE(iter);
        auto t = tph::random_template(rng);
        auto dag = project(t, {1.0, 2});
        auto profile = tph::exact_profile(rng, dag, 1);
        auto asg = tph::random_assignment(rng, dag, 1);
        auto ec = evaluate(dag, asg, profile);
        auto r = cost_composition(ec, dag.tiers);
        CHECK(same_bits(r.movement_s + r.shared_io_s + r.local_io_s, ec.makespan));
        if (ec.makespan > 0.0)
            CHECK(same_bits(r.movement_share + r.shared_io_share + r.local_io_share, 1.0));
        CHECK(r.movement_s >= 0.0);
        CHECK(r.shared_io_s >= 0.0);
        CHECK(r.local_io_s >= 0.0);
    }
}

TEST_CASE("sensitivity marks stages that never matter as dont_care") {
    // makespan depends only on stage a; stage b keeps full freedom
    std::vector<evaluated_config> configs;
    std::vector<std::string> a_tiers = {"tmpfs", "ssd"};
    std::vector<std::string> b_tiers = {"tmpfs", "ssd"};
    std::uint64_t idx = 0;
    for (int rep = 0; rep < 3; ++rep)
        for (const auto &at : a_tiers)
            for (const auto &bt : b_tiers)
                configs.push_back(cfg(idx++, {{"a", at}, {"b", bt}},
                                      at == "tmpfs" ? 10.0 : 20.0));
    auto X = encode(configs, tph::test_tiers());
    cross_fit_params p;
    p.folds = 2;
    p.repeats = 1;
    p.cart.min_leaf = 2;
    p.sep.min_leaf_eval = 2;
    auto model = mine_regions(X, 5, p);
    REQUIRE(model.regions.size() == 2);

    auto rep = sensitivity_classify(configs, model, 0.1);
    CHECK(rep.epsilon == 0.1);
    REQUIRE(rep.overall.size() == 2);
    for (const auto &ss : rep.overall) {
        if (ss.stage == "a") {
            CHECK(ss.dont_care == false);
        } else {
            CHECK(ss.stage == "b");
            CHECK(ss.dont_care == true);
            CHECK(ss.max_rel_swing == 0.0);
        }
    }
    for (const auto &rs : rep.regions)
        for (const auto &ss : rs.stages)
            if (ss.stage == "b") CHECK(ss.dont_care == true);
}

namespace {

projected_dag wide_dag(std::uint64_t read_mb_x, std::uint64_t read_mb_y) {
    workflow_template t;
    t.name = "wide";
    t.tiers = tph::test_tiers();
    t.initial_data_tier = "beegfs";
    t.final_data_tier = "beegfs";
    t.stages = {{"x", 0, tph::tier_names(t.tiers)}, {"y", 0, tph::tier_names(t.tiers)}};
    constexpr std::uint64_t mb = 1048576;
    scaling_rule rx{rule_kind::constant, read_mb_x, mb, read_mb_x * mb};
    scaling_rule ry{rule_kind::constant, read_mb_y, mb, read_mb_y * mb};
    scaling_rule tiny{rule_kind::constant, 1, mb, mb};
    t.edges = {{external_source, "x", rx, access_pattern::sequential},
               {external_source, "y", ry, access_pattern::sequential},
               {"x", external_sink, tiny, access_pattern::sequential},
               {"y", external_sink, tiny, access_pattern::sequential}};
    return project(t, {1.0, 1});
}

storage_profile flat_profile_for(const projected_dag &dag) {
    constexpr double mb = 1048576.0;
    storage_profile p;
    std::set<std::uint64_t> volumes;
    for (const auto &e : dag.edges) volumes.insert(e.props.volume);
    for (const char *tier : {"tmpfs", "ssd", "beegfs"})
        for (auto vol : volumes) {
            for (auto io : {io_type::read, io_type::write, io_type::copy_in, io_type::copy_out}) {
                profile_record r;
                r.tier = tier;
                r.io = io;
                r.pattern = access_pattern::sequential;
                r.nodes = 1;
                r.tpn = 1;
                r.transfer_size = 1048576;
                r.total_size = vol;
                r.rate = io == io_type::read ? 50.0 * mb
                         : io == io_type::write ? 100.0 * mb
                                                : 30.0 * mb;
                p.records.push_back(r);
            }
        }
    return p;
}

} // namespace

TEST_CASE("robustness flags stragglers that a small nudge can flip") {
    // close peers: 100 MB vs 95 MB reads; 10% on the smaller one overtakes
    auto dag = wide_dag(100, 95);
    auto profile = flat_profile_for(dag);
    assignment asg;
    asg.tpn = 1;
    asg.tier_of = {{"x", "beegfs"}, {"y", "beegfs"}};
    auto ec = evaluate(dag, asg, profile);
    auto rep = robustness(ec, dag, profile, 0.1);
    CHECK(rep.trace_stable == false);
    CHECK(rep.worst_case_delta_s > 0.0);
    CHECK(rep.rank_bound_known == false);
    CHECK(rep.rank_shift_bound == 0);

    // far peers: no single nudge reorders anything
    auto far = wide_dag(100, 10);
    auto far_profile = flat_profile_for(far);
    auto far_ec = evaluate(far, asg, far_profile);
    auto far_rep = robustness(far_ec, far, far_profile, 0.1);
    CHECK(far_rep.trace_stable == true);

    std::vector<double> population = {far_ec.makespan, far_ec.makespan + 0.01,
                                      far_ec.makespan * 2.0, far_ec.makespan + 1000.0};
    auto ranked = robustness(far_ec, far, far_profile, 0.1, population);
    CHECK(ranked.rank_bound_known == true);
    CHECK(ranked.rank_shift_bound >= 1);
    CHECK(ranked.worst_case_rel_delta ==
          doctest::Approx(ranked.worst_case_delta_s / far_ec.makespan).epsilon(1e-15));
}
