#pragma once

// Measured storage rate tables and the three-part time model built on them.
//
// A profile row records the sustained byte rate of one operation class
// (read/write for on-tier execution I/O, copy_in/copy_out for relocation)
// at one concurrency and size point. estimate_rate answers arbitrary points
// by exact match or log-space inverse-distance interpolation over the two
// nearest measured points. component_times turns a projected DAG plus a
// tier assignment into per-stage {stage_in, execution, stage_out} seconds.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tierplan/workflow.hpp"

namespace tierplan {

enum class io_type { read, write, copy_in, copy_out };

struct profile_record {
    std::string tier;
    io_type io = io_type::read;
    access_pattern pattern = access_pattern::sequential;
    std::uint64_t nodes = 1;
    std::uint64_t tpn = 1;
    std::uint64_t transfer_size = 1; // bytes per access
    std::uint64_t total_size = 1;    // bytes moved in the measurement
    double rate = 0.0;               // bytes per second
};

struct storage_profile {
    std::vector<profile_record> records;
};

struct rate_query {
    std::string tier;
    io_type io = io_type::read;
    access_pattern pattern = access_pattern::sequential;
    std::uint64_t nodes = 1;
    std::uint64_t tpn = 1;
    std::uint64_t transfer_size = 1;
    std::uint64_t total_size = 1;
};

// Exact dimension match wins; otherwise interpolates ln(rate) between the two
// nearest records by inverse log-space Euclidean distance over
// (nodes, tpn, transfer_size, total_size). A single candidate record is used
// as-is. Throws errc::no_profile_data when no record matches
// (tier, io, pattern). Permuting profile rows never changes the estimate.
double estimate_rate(const storage_profile &profile, const rate_query &q);

struct component_seconds {
    double stage_in = 0.0;
    double execution = 0.0;
    double stage_out = 0.0;
};

// Stage name -> tier name for every stage, plus the per-node task count used
// for execution-rate lookups. Relocation lookups always use tpn = 1.
struct assignment {
    std::map<std::string, std::string> tier_of;
    std::uint64_t tpn = 1;
};

// Per-stage time model under one assignment. Edge sums follow template
// declaration order. Relocation over an inner edge is charged once, on the
// consumer's stage_in; producer stage_out covers only edges into the external
// sink whose data must leave the producer's tier.
std::map<std::string, component_seconds> component_times(const projected_dag &dag,
                                                         const assignment &asg,
                                                         const storage_profile &profile);

// CSV with header:
// tier,io_type,pattern,nodes,tpn,transfer_size_bytes,total_size_bytes,rate_bytes_per_s
storage_profile parse_profile_csv(const std::string &text);
storage_profile load_profile_file(const std::string &path);
std::string serialize_profile_csv(const storage_profile &profile);

const char *io_type_name(io_type t);

} // namespace tierplan
