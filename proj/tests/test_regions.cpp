#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "tierplan/regions.hpp"

using namespace tierplan;

namespace {

// Two well-separated clusters keyed to the tier of a single stage.
feature_matrix two_cluster_matrix() {
    feature_matrix X;
    X.columns.push_back({feature_column::one_hot, "a", "tmpfs"});
    X.columns.push_back({feature_column::one_hot, "a", "ssd"});
    for (int i = 0; i < 30; ++i) {
        double on = i < 15 ? 1.0 : 0.0;
        X.values.push_back(on);
        X.values.push_back(1.0 - on);
        X.y.push_back((on > 0.5 ? 10.0 : 20.0) + 0.1 * ((i % 5) - 2));
        X.config_index.push_back(static_cast<std::uint64_t>(i));
        X.row_scale.push_back(0.0);
    }
    return X;
}

cross_fit_params small_params() {
    cross_fit_params p;
    p.folds = 5;
    p.repeats = 1;
    p.cart.min_leaf = 2;
    p.sep.min_leaf_eval = 2;
    return p;
}

// Valid one-hot layout: per stage a block of tier columns with exactly one
// active entry per row.
feature_matrix random_matrix(tph::rng_t &rng, std::size_t min_rows = 10, std::size_t max_rows = 40) {
    feature_matrix X;
    std::size_t stages = tph::u64_in(rng, 1, 3);
    std::vector<std::size_t> widths;
    for (std::size_t s = 0; s < stages; ++s) {
        widths.push_back(tph::u64_in(rng, 2, 3));
        for (std::size_t t = 0; t < widths.back(); ++t)
            X.columns.push_back({feature_column::one_hot, "s" + std::to_string(s),
                                 "t" + std::to_string(t)});
    }
    std::size_t n = tph::u64_in(rng, min_rows, max_rows);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t s = 0; s < stages; ++s) {
            std::size_t pick = tph::u64_below(rng, widths[s]);
            for (std::size_t t = 0; t < widths[s]; ++t)
                X.values.push_back(t == pick ? 1.0 : 0.0);
        }
        X.y.push_back(tph::real_in(rng, 1.0, 100.0));
        X.config_index.push_back(r);
        X.row_scale.push_back(0.0);
    }
    return X;
}

} // namespace

TEST_CASE("make_folds covers every row exactly once") {
    tph::rng_t rng(601);
    for (int iter = 0; iter < 200; ++iter) {
        CAPTURE(iter);
        std::size_t rows = tph::u64_in(rng, 5, 200);
        std::size_t folds = tph::u64_in(rng, 2, std::min<std::size_t>(rows, 8));
        std::uint64_t seed = rng();
        std::size_t repeat = tph::u64_below(rng, 4);
        auto f = make_folds(rows, folds, seed, repeat);
        REQUIRE(f.size() == folds);
        std::vector<std::size_t> all;
        for (const auto &part : f) all.insert(all.end(), part.begin(), part.end());
        CHECK(all.size() == rows);
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> want(rows);
        std::iota(want.begin(), want.end(), 0);
        CHECK(all == want);
        // balanced within one row
        std::size_t lo = rows, hi = 0;
        for (const auto &part : f) {
            lo = std::min(lo, part.size());
            hi = std::max(hi, part.size());
        }
        CHECK(hi - lo <= 1);
        // deterministic, and a different repeat reshuffles under the same seed
        CHECK(make_folds(rows, folds, seed, repeat) == f);
        if (rows > 10) {
            auto other = make_folds(rows, folds, seed, repeat + 7);
            CHECK(other != f);
        }
    }
}

TEST_CASE("two clean clusters select a two-leaf model with a perfect balance score") {
    auto X = two_cluster_matrix();
    auto r = cross_fit_select(X, 42, small_params());
    auto model = finalize(X, r.alpha_star, small_params(), 42, r.report);
    REQUIRE(model.regions.size() == 2);
    CHECK(model.regions[0].median_makespan < model.regions[1].median_makespan);
    CHECK(model.regions[0].median_makespan == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(model.regions[1].median_makespan == doctest::Approx(20.0).epsilon(1e-12));

    // the winning alpha scores a perfect balance of error and separation
    double best_j = 0.0;
    for (const auto &row : r.report)
        if (row.alpha == r.alpha_star) best_j = row.j;
    CHECK(std::fabs(best_j - 1.0) <= 1e-12);
}

TEST_CASE("constant targets collapse to a single region") {
    feature_matrix X;
    X.columns.push_back({feature_column::one_hot, "a", "tmpfs"});
    X.columns.push_back({feature_column::one_hot, "a", "ssd"});
    for (int i = 0; i < 10; ++i) {
        X.values.push_back(i % 2 ? 1.0 : 0.0);
        X.values.push_back(i % 2 ? 0.0 : 1.0);
        X.y.push_back(5.0);
        X.config_index.push_back(static_cast<std::uint64_t>(i));
        X.row_scale.push_back(0.0);
    }
    auto model = mine_regions(X, 42, small_params());
    REQUIRE(model.regions.size() == 1);
    CHECK(model.regions[0].members.size() == 10);
    CHECK(model.regions[0].median_makespan == 5.0);
    auto er = epsilon_check(model, 0.1);
    CHECK(er.all_pass == true);
    REQUIRE(er.regions.size() == 1);
    CHECK(er.regions[0].max_rel_spread == 0.0);
}

TEST_CASE("finalize splits rules into admissible tier sets") {
    auto X = two_cluster_matrix();
    auto model = mine_regions(X, 42, small_params());
    REQUIRE(model.regions.size() == 2);
    CHECK(model.regions[0].members.size() == 15);
    // fast region: a on tmpfs; slow region: everything else a offers
    const auto &fast = model.regions[0].rule;
    REQUIRE(fast.admissible.size() == 1);
    CHECK(fast.admissible[0].first == "a");
    CHECK(fast.admissible[0].second == std::vector<std::string>{"tmpfs"});
    const auto &slow = model.regions[1].rule;
    REQUIRE(slow.admissible.size() == 1);
    CHECK(slow.admissible[0].second == std::vector<std::string>{"ssd"});

    for (std::size_t row = 0; row < X.rows(); ++row) {
        std::size_t k = model.row_region[row];
        CHECK(model.regions[k].rule.matches(X, row));
        for (std::size_t other = 0; other < model.regions.size(); ++other)
            if (other != k) CHECK(model.regions[other].rule.matches(X, row) == false);
    }
}

TEST_CASE("regions order by median and keep member bookkeeping") {
    tph::rng_t rng(602);
    for (int iter = 0; iter < 40; ++iter) {
        CAPTURE(iter);
        auto X = random_matrix(rng, 12, 36);
        auto model = mine_regions(X, 1000 + static_cast<std::uint64_t>(iter), small_params());
        REQUIRE(!model.regions.empty());
        CHECK(model.row_region.size() == X.rows());
        CHECK(model.row_y == X.y);
        CHECK(model.row_config_index == X.config_index);
        std::vector<bool> seen(X.rows(), false);
        for (std::size_t k = 0; k < model.regions.size(); ++k) {
            const auto &reg = model.regions[k];
            CHECK(reg.index == k);
            if (k + 1 < model.regions.size())
                CHECK(reg.median_makespan <= model.regions[k + 1].median_makespan);
            std::vector<double> ys;
            for (auto r : reg.members) {
                CHECK(model.row_region[r] == k);
                CHECK(!seen[r]);
                seen[r] = true;
                ys.push_back(X.y[r]);
            }
            CHECK(reg.median_makespan == median(ys));
            // rule membership coincides with leaf membership
            for (std::size_t row = 0; row < X.rows(); ++row)
                CHECK(reg.rule.matches(X, row) == (model.row_region[row] == k));
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    }
}

TEST_CASE("mining is deterministic for a fixed seed") {
    tph::rng_t rng(603);
    for (int iter = 0; iter < 10; ++iter) {
        CAPTURE(iter);
        auto X = random_matrix(rng, 15, 30);
        auto a = mine_regions(X, 7, small_params());
        auto b = mine_regions(X, 7, small_params());
        CHECK(serialize_region_model(a) == serialize_region_model(b));
    }
}

TEST_CASE("uniform target rescaling keeps the selected partition") {
    tph::rng_t rng(604);
    for (int iter = 0; iter < 25; ++iter) {
        CAPTURE(iter);
        auto X = two_cluster_matrix();
        for (auto &y : X.y) y += tph::real_in(rng, -0.01, 0.01);
        auto base = mine_regions(X, 42, small_params());
        auto scaled = X;
        double c = tph::real_in(rng, 2.0, 8.0);
        for (auto &y : scaled.y) y *= c;
        auto model = mine_regions(scaled, 42, small_params());
        REQUIRE(model.regions.size() == base.regions.size());
        for (std::size_t k = 0; k < model.regions.size(); ++k)
            CHECK(model.regions[k].members == base.regions[k].members);
    }
}

TEST_CASE("region models survive a serialize parse round trip") {
    tph::rng_t rng(605);
    for (int iter = 0; iter < 30; ++iter) {
        CAPTURE(iter);
        auto X = random_matrix(rng, 10, 24);
        auto model = mine_regions(X, 99 + static_cast<std::uint64_t>(iter), small_params());
        auto text = serialize_region_model(model);
        auto back = parse_region_model(text);
        CHECK(serialize_region_model(back) == text);
        CHECK(back.alpha_star == model.alpha_star);
        CHECK(back.seed == model.seed);
        REQUIRE(back.regions.size() == model.regions.size());
        for (std::size_t k = 0; k < model.regions.size(); ++k) {
            CHECK(back.regions[k].members == model.regions[k].members);
            CHECK(back.regions[k].median_makespan == model.regions[k].median_makespan);
            CHECK(back.regions[k].rule.admissible == model.regions[k].rule.admissible);
        }
        CHECK(back.row_region == model.row_region);
        CHECK(membership_csv(back) == membership_csv(model));
    }
}

TEST_CASE("parse_region_model rejects malformed text") {
    CHECK_THROWS_AS(parse_region_model(""), error);
    CHECK_THROWS_AS(parse_region_model("{"), error);
    CHECK_THROWS_AS(parse_region_model("{\"alpha_star\": 1}"), error);
}

TEST_CASE("membership table lists rows with their region and target") {
    auto X = two_cluster_matrix();
    auto model = mine_regions(X, 42, small_params());
    auto csv = membership_csv(model);
    CHECK(csv.rfind("config_index,region_index,makespan_s\n", 0) == 0);
    std::size_t lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    CHECK(lines == X.rows() + 1);
}

TEST_CASE("epsilon_check grades spread against the median") {
    feature_matrix X;
    X.columns.push_back({feature_column::one_hot, "a", "tmpfs"});
    X.columns.push_back({feature_column::one_hot, "a", "ssd"});
    for (int i = 0; i < 9; ++i) {
        X.values.push_back(i < 3 ? 1.0 : 0.0);
        X.values.push_back(i < 3 ? 0.0 : 1.0);
        X.y.push_back(i < 3 ? (9.0 + i) : 100.0);
        X.config_index.push_back(static_cast<std::uint64_t>(i));
        X.row_scale.push_back(0.0);
    }
    cross_fit_params p = small_params();
    p.folds = 3;
    p.cart.min_leaf = 3;
    auto model = mine_regions(X, 42, p);
    REQUIRE(model.regions.size() == 2);
    // members {9,10,11}: spread (11-9)/10 = 0.2
    auto loose = epsilon_check(model, 0.25);
    CHECK(loose.regions[0].max_rel_spread == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(loose.regions[0].pass == true);
    CHECK(loose.all_pass == true);
    auto tight = epsilon_check(model, 0.15);
    CHECK(tight.regions[0].pass == false);
    CHECK(tight.regions[1].pass == true);
    CHECK(tight.all_pass == false);
    CHECK(tight.epsilon == 0.15);
}
