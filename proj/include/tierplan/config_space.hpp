#pragma once

// Enumeration and evaluation of tier-placement configurations.
//
// A configuration assigns one candidate tier to every stage. Evaluation sums,
// level by level, the slowest stage_in, the slowest execution and the slowest
// stage_out, recording who set each maximum. The accumulation order is fixed
// (levels ascending, stage_in then execution then stage_out) so results are
// bit-for-bit reproducible.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tierplan/storage_profile.hpp"
#include "tierplan/workflow.hpp"

namespace tierplan {

enum class phase { stage_in, execution, stage_out };

const char *phase_name(phase p);

struct crit_entry {
    int level = 0;
    phase component = phase::stage_in;
    std::string stage;
    std::string tier;
    double seconds = 0.0;

    bool operator==(const crit_entry &) const = default;
};

struct evaluated_config {
    std::uint64_t index = 0; // enumeration position
    assignment asg;
    double makespan = 0.0; // equals the ordered sum of trace seconds
    std::vector<crit_entry> trace; // 3 entries per level
};

// Number of configurations the candidate sets span (product of set sizes).
std::uint64_t config_count(const projected_dag &dag);

// Streams assignments in lexicographic order: stages sorted by name, each
// stage's tiers by speed_rank, last stage varying fastest. The first emitted
// assignment puts every stage on its fastest candidate. Return false from the
// callback to stop early. Throws errc::empty_candidate_set if a stage has no
// candidates.
void enumerate(const projected_dag &dag, std::uint64_t tpn,
               const std::function<bool(std::uint64_t, const assignment &)> &emit);

// Slowest stage of one level for one component; ties go to the
// lexicographically smallest stage name.
crit_entry straggler(const std::vector<std::string> &level_stages, int level, phase component,
                     const std::map<std::string, component_seconds> &times, const assignment &asg);

// Level-sum of the three per-level maxima given precomputed component times.
std::pair<double, std::vector<crit_entry>> sum_critical_path(
    const projected_dag &dag, const assignment &asg,
    const std::map<std::string, component_seconds> &times);

evaluated_config evaluate(const projected_dag &dag, const assignment &asg,
                          const storage_profile &profile, std::uint64_t index = 0);

// Evaluates the whole space (refusing if it exceeds cap), sorted by makespan
// ascending with ties kept in enumeration order. threads > 1 splits the work;
// output is identical to the sequential result.
std::vector<evaluated_config> evaluate_all(const projected_dag &dag, const storage_profile &profile,
                                           std::uint64_t tpn, std::uint64_t cap,
                                           unsigned threads = 1);

// CSV round trip: config_index, assignment, tpn, makespan_s, trace.
std::string serialize_evaluated_csv(const std::vector<evaluated_config> &configs);
std::vector<evaluated_config> parse_evaluated_csv(const std::string &text);
std::vector<evaluated_config> load_evaluated_file(const std::string &path);

std::string format_double(double v); // shortest round-trip decimal form

} // namespace tierplan
