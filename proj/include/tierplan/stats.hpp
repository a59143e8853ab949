#pragma once

// Effect-size statistics used to score how well adjacent performance groups
// separate: small-sample-corrected standardized mean difference, a
// variance-adaptive pass threshold, and a size-weighted aggregate over
// adjacent group pairs.

#include <span>
#include <vector>

#include "tierplan/error.hpp"

namespace tierplan {

double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs); // n-1 denominator, needs n >= 2
double median(std::vector<double> xs);        // by value: sorts its copy

// Small-sample-corrected standardized difference of two sample means.
// Both samples need >= 2 values. When both variances are zero the value
// degenerates: +inf for different means, 0 for equal means.
double hedges_g(std::span<const double> yi, std::span<const double> yj);

struct separation_params {
    double g_floor = 0.3;
    double g_cap = 3.0;
    double delta = 0.05;      // acceptable relative spread
    std::size_t min_leaf_eval = 3;
};

// Pass threshold scaled to the pooled coefficient of variation and clamped
// into [g_floor, g_cap]. Means must be positive. Zero pooled variation maps
// to the cap.
double adaptive_threshold(std::span<const double> yi, std::span<const double> yj,
                          const separation_params &p);

struct separation_result {
    double value = 0.0;
    std::size_t evaluable_groups = 0;
    bool degenerate = false; // fewer than 2 groups large enough to compare
};

// Weighted share of adjacent-pair effect sizes that clear their pair-specific
// threshold. Groups below min_leaf_eval members are dropped; remaining groups
// are ordered by median. Pairs under threshold keep their weight in the
// denominator and add nothing to the numerator.
separation_result separation(const std::vector<std::vector<double>> &groups,
                             const separation_params &p);

// Min-max normalization onto [0,1]. A constant finite series maps to all 0.5;
// +inf entries map to 1 and the finite remainder is scaled over its own range.
std::vector<double> minmax_normalize(std::span<const double> xs);

} // namespace tierplan
