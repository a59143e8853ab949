#pragma once

// Workflow templates and their projection to concrete task/data DAGs.
//
// A template describes stages (grouped into barrier levels), the storage
// tiers each stage may run against, and data edges whose byte footprint is
// given by a scaling rule. Projection instantiates the template at a given
// (data_scale, task_scale) and yields per-edge access counts, access sizes
// and volumes that the evaluation layers consume.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tierplan/error.hpp"

namespace tierplan {

// Pseudo endpoints for edges that enter or leave the workflow.
inline constexpr const char *external_source = "__source__";
inline constexpr const char *external_sink = "__sink__";

enum class tier_class { local, remote };

struct tier_id {
    std::string name;
    tier_class cls = tier_class::local;
    int speed_rank = 0; // 1 = fastest

    bool operator==(const tier_id &) const = default;
};

using tier_catalog = std::vector<tier_id>;

const tier_id &find_tier(const tier_catalog &catalog, const std::string &name);

struct stage_id {
    std::string name;
    int level = 0;

    bool operator==(const stage_id &) const = default;
};

enum class rule_kind {
    constant,
    volume_linear_in_data_scale,
    volume_inverse_in_task_scale,
    access_size_fixed_volume_linear,
};

enum class access_pattern { sequential, random_access };

struct scaling_rule {
    rule_kind kind = rule_kind::constant;
    std::uint64_t base_access_count = 0;
    std::uint64_t base_access_size = 0; // bytes
    std::uint64_t base_volume = 0;      // bytes
};

enum class edge_direction { producer, consumer };

struct edge_props {
    std::uint64_t access_count = 0;
    std::uint64_t access_size = 0; // bytes
    std::uint64_t volume = 0;      // bytes
    access_pattern pattern = access_pattern::sequential;
    edge_direction direction = edge_direction::consumer;

    bool operator==(const edge_props &) const = default;
};

struct template_edge {
    std::string from; // stage name or external_source
    std::string to;   // stage name or external_sink
    scaling_rule rule;
    access_pattern pattern = access_pattern::sequential;
};

struct template_stage {
    std::string name;
    int level = 0;
    std::vector<std::string> tiers; // candidate tier names
};

struct workflow_template {
    std::string name;
    tier_catalog tiers;
    std::vector<template_stage> stages;
    std::vector<template_edge> edges;
    std::string initial_data_tier;
    std::string final_data_tier;
};

struct scale_point {
    double data_scale = 1.0;
    int task_scale = 1; // node count / concurrency
};

struct projected_edge {
    std::string from;
    std::string to;
    edge_props props;
};

struct projected_dag {
    std::string template_name;
    tier_catalog tiers;
    std::vector<stage_id> stages;               // sorted by name
    std::vector<std::vector<std::string>> levels; // level -> stage names, name-sorted
    std::vector<projected_edge> edges;          // template declaration order
    std::map<std::string, std::vector<std::string>> candidates; // stage -> tier names by speed_rank
    std::string initial_data_tier;
    std::string final_data_tier;
    scale_point scale;

    const stage_id &stage(const std::string &name) const;
};

struct violation {
    std::string code;    // short machine tag, e.g. "level-order"
    std::string subject; // stage/edge/tier identity
    std::string message;
};

// Structural checks; returns an empty list for a well-formed template.
// Order of entries is deterministic: catalog, stages (name order), edges
// (declaration order), levels (ascending).
std::vector<violation> validate(const workflow_template &tpl);

// Applies every edge's scaling rule at the given scale. Throws
// errc::invalid_workflow if validate() reports anything, errc::scale_overflow
// if a scaled volume leaves the representable byte range.
projected_dag project(const workflow_template &tpl, const scale_point &scale);

// Evaluates one rule at a scale; exposed for direct inspection.
edge_props apply_rule(const scaling_rule &rule, access_pattern pattern, const scale_point &scale);

// Built-in templates: "genome5" (5 stages, 3 levels, fan-in),
// "chain9" (9 stages in a line), "mlloop4" (4-stage loop body unrolled
// `iterations` times). Throws errc::unknown_template otherwise.
workflow_template builtin_template(const std::string &name, int iterations = 2);

// Structured-text (JSON) round trip for templates and projected DAGs.
// parse_template rejects unknown keys and malformed fields with errc::parse_error.
workflow_template parse_template(const std::string &json_text);
std::string serialize_template(const workflow_template &tpl);
std::string serialize_projected(const projected_dag &dag);

workflow_template load_template_file(const std::string &path);

} // namespace tierplan
