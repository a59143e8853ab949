#include "tierplan/config_space.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

namespace tierplan {

const char *phase_name(phase p) {
    switch (p) {
    case phase::stage_in: return "stage_in";
    case phase::execution: return "execution";
    case phase::stage_out: return "stage_out";
    }
    return "stage_in";
}

std::string format_double(double v) {
    char buf[64];
    auto *end = std::to_chars(buf, buf + sizeof buf, v).ptr;
    return std::string(buf, end);
}

std::uint64_t config_count(const projected_dag &dag) {
    std::uint64_t n = 1;
    for (const auto &s : dag.stages) {
        const auto &cand = dag.candidates.at(s.name);
        if (cand.empty())
            throw error(errc::empty_candidate_set, "stage " + s.name + " has no candidate tiers");
        n *= cand.size();
    }
    return n;
}

void enumerate(const projected_dag &dag, std::uint64_t tpn,
               const std::function<bool(std::uint64_t, const assignment &)> &emit) {
    std::vector<const std::vector<std::string> *> cands;
    for (const auto &s : dag.stages) {
        const auto &c = dag.candidates.at(s.name);
        if (c.empty())
            throw error(errc::empty_candidate_set, "stage " + s.name + " has no candidate tiers");
        cands.push_back(&c);
    }
    std::vector<std::size_t> idx(cands.size(), 0);
    assignment asg;
    asg.tpn = tpn;
    std::uint64_t pos = 0;
    for (;;) {
        for (std::size_t i = 0; i < cands.size(); ++i)
            asg.tier_of[dag.stages[i].name] = (*cands[i])[idx[i]];
        if (!emit(pos, asg)) return;
        ++pos;
        std::size_t i = cands.size();
        while (i > 0) {
            --i;
            if (++idx[i] < cands[i]->size()) break;
            idx[i] = 0;
            if (i == 0) return;
        }
        if (cands.empty()) return;
    }
}

crit_entry straggler(const std::vector<std::string> &level_stages, int level, phase component,
                     const std::map<std::string, component_seconds> &times, const assignment &asg) {
    if (level_stages.empty())
        throw error(errc::invalid_workflow, "level " + std::to_string(level) + " has no stages");
    auto sorted = level_stages;
    std::sort(sorted.begin(), sorted.end());
    crit_entry best;
    best.level = level;
    best.component = component;
    bool first = true;
    for (const auto &name : sorted) {
        const auto &ct = times.at(name);
        double t = component == phase::stage_in    ? ct.stage_in
                   : component == phase::execution ? ct.execution
                                                   : ct.stage_out;
        if (first || t > best.seconds) {
            best.stage = name;
            best.tier = asg.tier_of.at(name);
            best.seconds = t;
            first = false;
        }
    }
    return best;
}

std::pair<double, std::vector<crit_entry>> sum_critical_path(
    const projected_dag &dag, const assignment &asg,
    const std::map<std::string, component_seconds> &times) {
    double total = 0.0;
    std::vector<crit_entry> trace;
    trace.reserve(dag.levels.size() * 3);
    for (std::size_t l = 0; l < dag.levels.size(); ++l) {
        for (phase c : {phase::stage_in, phase::execution, phase::stage_out}) {
            crit_entry e = straggler(dag.levels[l], static_cast<int>(l), c, times, asg);
            total += e.seconds;
            trace.push_back(std::move(e));
        }
    }
    return {total, std::move(trace)};
}

evaluated_config evaluate(const projected_dag &dag, const assignment &asg,
                          const storage_profile &profile, std::uint64_t index) {
    evaluated_config out;
    out.index = index;
    out.asg = asg;
    auto times = component_times(dag, asg, profile);
    auto [makespan, trace] = sum_critical_path(dag, asg, times);
    out.makespan = makespan;
    out.trace = std::move(trace);
    return out;
}

std::vector<evaluated_config> evaluate_all(const projected_dag &dag, const storage_profile &profile,
                                           std::uint64_t tpn, std::uint64_t cap, unsigned threads) {
    std::uint64_t n = config_count(dag);
    if (n > cap)
        throw error(errc::cap_exceeded, "space has " + std::to_string(n) +
                                            " configurations, cap is " + std::to_string(cap));
    std::vector<assignment> assignments;
    assignments.reserve(n);
    enumerate(dag, tpn, [&](std::uint64_t, const assignment &a) {
        assignments.push_back(a);
        return true;
    });

    std::vector<evaluated_config> out(assignments.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            out[i] = evaluate(dag, assignments[i], profile, i);
    };
    if (threads <= 1 || assignments.size() < 2) {
        work(0, assignments.size());
    } else {
        unsigned t = std::min<unsigned>(threads, static_cast<unsigned>(assignments.size()));
        std::vector<std::thread> pool;
        std::size_t chunk = (assignments.size() + t - 1) / t;
        for (unsigned k = 0; k < t; ++k) {
            std::size_t b = k * chunk;
            std::size_t e = std::min(assignments.size(), b + chunk);
            if (b >= e) break;
            pool.emplace_back(work, b, e);
        }
        for (auto &th : pool) th.join();
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const evaluated_config &a, const evaluated_config &b) {
                         return a.makespan < b.makespan;
                     });
    return out;
}

namespace {

std::string assignment_field(const assignment &asg) {
    std::string s;
    for (const auto &[stage, tier] : asg.tier_of) {
        if (!s.empty()) s += ';';
        s += stage + ":" + tier;
    }
    return s;
}

std::string trace_field(const std::vector<crit_entry> &trace) {
    std::string s;
    for (const auto &e : trace) {
        if (!s.empty()) s += ';';
        s += std::to_string(e.level) + "|" + phase_name(e.component) + "|" + e.stage + "|" +
             e.tier + "|" + format_double(e.seconds);
    }
    return s;
}

double parse_double_strict(const std::string &s, const std::string &where) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw error(errc::parse_error, where + ": bad number '" + s + "'");
    return v;
}

} // namespace

std::string serialize_evaluated_csv(const std::vector<evaluated_config> &configs) {
    std::ostringstream out;
    out << "config_index,assignment,tpn,makespan_s,trace\n";
    for (const auto &c : configs)
        out << c.index << ',' << assignment_field(c.asg) << ',' << c.asg.tpn << ','
            << format_double(c.makespan) << ',' << trace_field(c.trace) << '\n';
    return out.str();
}

std::vector<evaluated_config> parse_evaluated_csv(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw error(errc::parse_error, "evaluated table: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "config_index,assignment,tpn,makespan_s,trace")
        throw error(errc::parse_error, "evaluated table: unexpected header '" + line + "'");
    std::vector<evaluated_config> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = "evaluated table line " + std::to_string(lineno);
        std::vector<std::string> fields;
        std::string f;
        std::istringstream ls(line);
        while (std::getline(ls, f, ',')) fields.push_back(f);
        if (fields.size() != 5)
            throw error(errc::parse_error, where + ": expected 5 fields");
        evaluated_config c;
        c.index = static_cast<std::uint64_t>(std::stoull(fields[0]));
        std::istringstream as(fields[1]);
        std::string part;
        while (std::getline(as, part, ';')) {
            auto colon = part.find(':');
            if (colon == std::string::npos)
                throw error(errc::parse_error, where + ": bad assignment entry '" + part + "'");
            c.asg.tier_of[part.substr(0, colon)] = part.substr(colon + 1);
        }
        if (c.asg.tier_of.empty())
            throw error(errc::parse_error, where + ": empty assignment");
        c.asg.tpn = std::stoull(fields[2]);
        c.makespan = parse_double_strict(fields[3], where);
        std::istringstream ts(fields[4]);
        while (std::getline(ts, part, ';')) {
            std::vector<std::string> cols;
            std::string col;
            std::istringstream ps(part);
            while (std::getline(ps, col, '|')) cols.push_back(col);
            if (cols.size() != 5)
                throw error(errc::parse_error, where + ": bad trace entry '" + part + "'");
            crit_entry e;
            e.level = std::stoi(cols[0]);
            if (cols[1] == "stage_in") e.component = phase::stage_in;
            else if (cols[1] == "execution") e.component = phase::execution;
            else if (cols[1] == "stage_out") e.component = phase::stage_out;
            else throw error(errc::parse_error, where + ": bad component '" + cols[1] + "'");
            e.stage = cols[2];
            e.tier = cols[3];
            e.seconds = parse_double_strict(cols[4], where);
            c.trace.push_back(std::move(e));
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<evaluated_config> load_evaluated_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw error(errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_evaluated_csv(buf.str());
}

} // namespace tierplan
