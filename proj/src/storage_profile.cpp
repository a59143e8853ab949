#include "tierplan/storage_profile.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>
#include <tuple>

namespace tierplan {

const char *io_type_name(io_type t) {
    switch (t) {
    case io_type::read: return "read";
    case io_type::write: return "write";
    case io_type::copy_in: return "copy_in";
    case io_type::copy_out: return "copy_out";
    }
    return "read";
}

namespace {

io_type parse_io_type(const std::string &s, int line) {
    if (s == "read") return io_type::read;
    if (s == "write") return io_type::write;
    if (s == "copy_in") return io_type::copy_in;
    if (s == "copy_out") return io_type::copy_out;
    throw error(errc::parse_error, "profile line " + std::to_string(line) + ": bad io_type '" + s + "'");
}

access_pattern parse_pat(const std::string &s, int line) {
    if (s == "sequential") return access_pattern::sequential;
    if (s == "random") return access_pattern::random_access;
    throw error(errc::parse_error, "profile line " + std::to_string(line) + ": bad pattern '" + s + "'");
}

std::uint64_t parse_u64_field(const std::string &s, int line, const char *field) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v == 0)
        throw error(errc::parse_error, "profile line " + std::to_string(line) + ": " + field +
                                           " must be a positive integer, got '" + s + "'");
    return v;
}

double parse_rate_field(const std::string &s, int line) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size() || !(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception &) {
        throw error(errc::parse_error,
                    "profile line " + std::to_string(line) + ": bad rate '" + s + "'");
    }
}

std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

using dims_key = std::tuple<std::string, int, int, std::uint64_t, std::uint64_t, std::uint64_t, std::uint64_t>;

dims_key key_of(const profile_record &r) {
    return {r.tier, static_cast<int>(r.io), static_cast<int>(r.pattern),
            r.nodes, r.tpn, r.transfer_size, r.total_size};
}

} // namespace

storage_profile parse_profile_csv(const std::string &text) {
    static const std::string header =
        "tier,io_type,pattern,nodes,tpn,transfer_size_bytes,total_size_bytes,rate_bytes_per_s";
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw error(errc::parse_error, "profile: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header)
        throw error(errc::parse_error, "profile: header must be exactly '" + header + "'");

    storage_profile profile;
    std::set<dims_key> seen;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 8)
            throw error(errc::parse_error, "profile line " + std::to_string(lineno) +
                                               ": expected 8 fields, got " + std::to_string(fields.size()));
        profile_record r;
        r.tier = fields[0];
        if (r.tier.empty())
            throw error(errc::parse_error, "profile line " + std::to_string(lineno) + ": empty tier");
        r.io = parse_io_type(fields[1], lineno);
        r.pattern = parse_pat(fields[2], lineno);
        r.nodes = parse_u64_field(fields[3], lineno, "nodes");
        r.tpn = parse_u64_field(fields[4], lineno, "tpn");
        r.transfer_size = parse_u64_field(fields[5], lineno, "transfer_size_bytes");
        r.total_size = parse_u64_field(fields[6], lineno, "total_size_bytes");
        r.rate = parse_rate_field(fields[7], lineno);
        if (!seen.insert(key_of(r)).second)
            throw error(errc::parse_error,
                        "profile line " + std::to_string(lineno) + ": duplicate dimension tuple");
        profile.records.push_back(std::move(r));
    }
    return profile;
}

storage_profile load_profile_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw error(errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_profile_csv(buf.str());
}

std::string serialize_profile_csv(const storage_profile &profile) {
    std::ostringstream out;
    out << "tier,io_type,pattern,nodes,tpn,transfer_size_bytes,total_size_bytes,rate_bytes_per_s\n";
    char buf[64];
    for (const auto &r : profile.records) {
        auto *end = std::to_chars(buf, buf + sizeof buf, r.rate).ptr;
        out << r.tier << ',' << io_type_name(r.io) << ','
            << (r.pattern == access_pattern::sequential ? "sequential" : "random") << ',' << r.nodes
            << ',' << r.tpn << ',' << r.transfer_size << ',' << r.total_size << ','
            << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
    }
    return out.str();
}

double estimate_rate(const storage_profile &profile, const rate_query &q) {
    struct candidate {
        double dist;
        std::uint64_t nodes, tpn, transfer, total;
        double rate;
    };
    std::vector<candidate> cands;
    const double ln_n = std::log(static_cast<double>(q.nodes));
    const double ln_t = std::log(static_cast<double>(q.tpn));
    const double ln_x = std::log(static_cast<double>(q.transfer_size));
    const double ln_s = std::log(static_cast<double>(q.total_size));

    for (const auto &r : profile.records) {
        if (r.tier != q.tier || r.io != q.io || r.pattern != q.pattern) continue;
        if (r.nodes == q.nodes && r.tpn == q.tpn && r.transfer_size == q.transfer_size &&
            r.total_size == q.total_size)
            return r.rate;
        double dn = std::log(static_cast<double>(r.nodes)) - ln_n;
        double dt = std::log(static_cast<double>(r.tpn)) - ln_t;
        double dx = std::log(static_cast<double>(r.transfer_size)) - ln_x;
        double ds = std::log(static_cast<double>(r.total_size)) - ln_s;
        cands.push_back({std::sqrt(dn * dn + dt * dt + dx * dx + ds * ds),
                         r.nodes, r.tpn, r.transfer_size, r.total_size, r.rate});
    }
    if (cands.empty())
        throw error(errc::no_profile_data,
                    "no profile rows for (" + q.tier + ", " + io_type_name(q.io) + ", " +
                        (q.pattern == access_pattern::sequential ? "sequential" : "random") + ")");
    if (cands.size() == 1) return cands.front().rate;

    // Total order on (distance, dims) keeps the pick independent of row order.
    std::sort(cands.begin(), cands.end(), [](const candidate &a, const candidate &b) {
        return std::tie(a.dist, a.nodes, a.tpn, a.transfer, a.total) <
               std::tie(b.dist, b.nodes, b.tpn, b.transfer, b.total);
    });
    const candidate &a = cands[0];
    const candidate &b = cands[1];
    double wa = 1.0 / a.dist;
    double wb = 1.0 / b.dist;
    double ln_rate = (wa * std::log(a.rate) + wb * std::log(b.rate)) / (wa + wb);
    return std::exp(ln_rate);
}

std::map<std::string, component_seconds> component_times(const projected_dag &dag,
                                                         const assignment &asg,
                                                         const storage_profile &profile) {
    for (const auto &s : dag.stages)
        if (!asg.tier_of.count(s.name))
            throw error(errc::invalid_workflow, "assignment misses stage " + s.name);

    auto rate = [&](const std::string &tier, io_type io, const edge_props &p, std::uint64_t tpn) {
        rate_query q;
        q.tier = tier;
        q.io = io;
        q.pattern = p.pattern;
        q.nodes = static_cast<std::uint64_t>(dag.scale.task_scale);
        q.tpn = tpn;
        q.transfer_size = p.access_size;
        q.total_size = p.volume;
        return estimate_rate(profile, q);
    };

    std::map<std::string, component_seconds> out;
    for (const auto &s : dag.stages) out[s.name] = {};

    for (const auto &e : dag.edges) {
        double volume = static_cast<double>(e.props.volume);
        std::string from_tier =
            e.from == external_source ? dag.initial_data_tier : asg.tier_of.at(e.from);
        if (e.to != external_sink) {
            const std::string &tier = asg.tier_of.at(e.to);
            auto &ct = out[e.to];
            ct.execution += volume / rate(tier, io_type::read, e.props, asg.tpn);
            if (from_tier != tier)
                ct.stage_in += volume / rate(tier, io_type::copy_in, e.props, 1);
        }
        if (e.from != external_source) {
            const std::string &tier = asg.tier_of.at(e.from);
            auto &ct = out[e.from];
            ct.execution += volume / rate(tier, io_type::write, e.props, asg.tpn);
            if (e.to == external_sink && dag.final_data_tier != tier)
                ct.stage_out += volume / rate(tier, io_type::copy_out, e.props, 1);
        }
    }
    return out;
}

} // namespace tierplan
