#include "tierplan/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tierplan {

double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2)
        throw error(errc::too_few_rows, "sample sd needs at least 2 values");
    double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double median(std::vector<double> xs) {
    if (xs.empty())
        throw error(errc::too_few_rows, "median of empty sample");
    std::sort(xs.begin(), xs.end());
    std::size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double hedges_g(std::span<const double> yi, std::span<const double> yj) {
    if (yi.size() < 2 || yj.size() < 2)
        throw error(errc::too_few_rows, "effect size needs 2+ values per sample");
    double mi = mean(yi);
    double mj = mean(yj);
    double si = sample_sd(yi);
    double sj = sample_sd(yj);
    double pooled = std::sqrt(0.5 * (si * si + sj * sj));
    if (pooled == 0.0)
        return mi == mj ? 0.0 : std::numeric_limits<double>::infinity();
    double nu = static_cast<double>(yi.size() + yj.size() - 2);
    double correction = 1.0 - 3.0 / (4.0 * nu - 1.0);
    return correction * std::abs(mi - mj) / pooled;
}

double adaptive_threshold(std::span<const double> yi, std::span<const double> yj,
                          const separation_params &p) {
    if (yi.size() < 2 || yj.size() < 2)
        throw error(errc::too_few_rows, "threshold needs 2+ values per sample");
    double mi = mean(yi);
    double mj = mean(yj);
    if (mi <= 0.0 || mj <= 0.0)
        throw error(errc::non_positive_mean, "variation coefficient needs positive means");
    double cvi = sample_sd(yi) / mi;
    double cvj = sample_sd(yj) / mj;
    double cv = std::sqrt(0.5 * (cvi * cvi + cvj * cvj));
    if (cv == 0.0) return p.g_cap;
    return std::max(p.g_floor, std::min(p.g_cap, p.delta / cv));
}

separation_result separation(const std::vector<std::vector<double>> &groups,
                             const separation_params &p) {
    separation_result res;

    struct entry {
        double med;
        std::size_t pos;
        const std::vector<double> *ys;
    };
    std::vector<entry> kept;
    // Pairing needs 2+ values per group for the sd, whatever min_leaf_eval says.
    std::size_t min_members = std::max<std::size_t>(p.min_leaf_eval, 2);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i].size() < min_members) continue;
        kept.push_back({median(groups[i]), i, &groups[i]});
    }
    res.evaluable_groups = kept.size();
    if (kept.size() < 2) {
        res.degenerate = true;
        return res;
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const entry &a, const entry &b) { return a.med < b.med; });

    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k + 1 < kept.size(); ++k) {
        const auto &a = *kept[k].ys;
        const auto &b = *kept[k + 1].ys;
        double g = hedges_g(a, b);
        double thr = adaptive_threshold(a, b, p);
        double na = static_cast<double>(a.size());
        double nb = static_cast<double>(b.size());
        double w = 2.0 * na * nb / (na + nb);
        den += w;
        if (g >= thr) num += g * w;
    }
    res.value = den > 0.0 ? num / den : 0.0;
    return res;
}

std::vector<double> minmax_normalize(std::span<const double> xs) {
    std::vector<double> out(xs.size(), 0.5);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    bool any_inf = false;
    bool any_finite = false;
    for (double x : xs) {
        if (std::isinf(x)) { any_inf = true; continue; }
        any_finite = true;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (!any_finite) return out; // all infinite: treat as indistinguishable
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (std::isinf(xs[i])) out[i] = 1.0;
        else if (hi > lo) out[i] = (xs[i] - lo) / (hi - lo);
        else out[i] = any_inf ? 0.0 : 0.5;
    }
    return out;
}

} // namespace tierplan
