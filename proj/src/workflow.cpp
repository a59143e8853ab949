#include "tierplan/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace tierplan {

using json = nlohmann::ordered_json;

const char *errc_name(errc c) {
    switch (c) {
    case errc::unknown_rule_kind: return "unknown_rule_kind";
    case errc::scale_overflow: return "scale_overflow";
    case errc::unknown_template: return "unknown_template";
    case errc::invalid_workflow: return "invalid_workflow";
    case errc::parse_error: return "parse_error";
    case errc::no_profile_data: return "no_profile_data";
    case errc::empty_candidate_set: return "empty_candidate_set";
    case errc::cap_exceeded: return "cap_exceeded";
    case errc::inconsistent_stage_sets: return "inconsistent_stage_sets";
    case errc::too_few_rows: return "too_few_rows";
    case errc::degenerate_variance: return "degenerate_variance";
    case errc::non_positive_mean: return "non_positive_mean";
    case errc::too_few_leaves: return "too_few_leaves";
    case errc::insufficient_data: return "insufficient_data";
    case errc::length_mismatch: return "length_mismatch";
    case errc::missing_scale_data: return "missing_scale_data";
    case errc::no_feasible_configuration: return "no_feasible_configuration";
    case errc::io_error: return "io_error";
    }
    return "unknown";
}

const tier_id &find_tier(const tier_catalog &catalog, const std::string &name) {
    for (const auto &t : catalog)
        if (t.name == name) return t;
    throw error(errc::invalid_workflow, "tier not in catalog: " + name);
}

const stage_id &projected_dag::stage(const std::string &name) const {
    auto it = std::lower_bound(stages.begin(), stages.end(), name,
                               [](const stage_id &s, const std::string &n) { return s.name < n; });
    if (it == stages.end() || it->name != name)
        throw error(errc::invalid_workflow, "unknown stage: " + name);
    return *it;
}

namespace {

bool is_pseudo(const std::string &name) {
    return name == external_source || name == external_sink;
}

} // namespace

std::vector<violation> validate(const workflow_template &tpl) {
    std::vector<violation> out;
    auto flag = [&](std::string code, std::string subject, std::string msg) {
        out.push_back({std::move(code), std::move(subject), std::move(msg)});
    };

    std::set<std::string> tier_names;
    std::set<int> ranks;
    for (const auto &t : tpl.tiers) {
        if (!tier_names.insert(t.name).second)
            flag("duplicate-tier", t.name, "tier name appears more than once");
        if (!ranks.insert(t.speed_rank).second)
            flag("duplicate-rank", t.name, "speed_rank shared with another tier");
    }
    if (tpl.tiers.empty())
        flag("empty-catalog", tpl.name, "no tiers declared");
    for (int r = 1; r <= static_cast<int>(tpl.tiers.size()); ++r)
        if (!ranks.count(r)) {
            flag("rank-gap", tpl.name, "speed_rank values are not contiguous from 1");
            break;
        }
    if (!tier_names.count(tpl.initial_data_tier))
        flag("unknown-tier", "initial_data_tier", "references tier " + tpl.initial_data_tier);
    if (!tier_names.count(tpl.final_data_tier))
        flag("unknown-tier", "final_data_tier", "references tier " + tpl.final_data_tier);

    std::map<std::string, int> stage_level;
    std::vector<std::string> names;
    for (const auto &s : tpl.stages) names.push_back(s.name);
    std::sort(names.begin(), names.end());

    int max_level = -1;
    for (const auto &s : tpl.stages) max_level = std::max(max_level, s.level);

    for (const auto &name : names) {
        const template_stage *s = nullptr;
        for (const auto &c : tpl.stages)
            if (c.name == name) { s = &c; break; }
        if (stage_level.count(name)) {
            flag("duplicate-stage", name, "stage name appears more than once");
            continue;
        }
        stage_level[name] = s->level;
        if (is_pseudo(name))
            flag("reserved-name", name, "stage uses a reserved endpoint name");
        if (s->level < 0)
            flag("bad-level", name, "level is negative");
        if (s->tiers.empty())
            flag("empty-candidates", name, "no candidate tiers");
        std::set<std::string> seen;
        for (const auto &t : s->tiers) {
            if (!tier_names.count(t))
                flag("unknown-tier", name, "candidate tier " + t + " not in catalog");
            if (!seen.insert(t).second)
                flag("duplicate-candidate", name, "candidate tier " + t + " repeated");
        }
    }

    std::set<std::string> touched;
    bool has_source_edge = false, has_sink_edge = false;
    for (std::size_t i = 0; i < tpl.edges.size(); ++i) {
        const auto &e = tpl.edges[i];
        std::string subject = e.from + "->" + e.to + "#" + std::to_string(i);
        if (e.from == external_source) has_source_edge = true;
        else if (!stage_level.count(e.from))
            flag("unknown-endpoint", subject, "producer not declared");
        if (e.to == external_sink) has_sink_edge = true;
        else if (!stage_level.count(e.to))
            flag("unknown-endpoint", subject, "consumer not declared");
        if (e.from == external_sink || e.to == external_source)
            flag("bad-endpoint", subject, "sink cannot produce, source cannot consume");
        if (e.from == e.to)
            flag("self-edge", subject, "edge connects a stage to itself");
        if (stage_level.count(e.from) && stage_level.count(e.to) &&
            stage_level[e.to] < stage_level[e.from])
            flag("level-order", subject, "level order violated: consumer level below producer level");
        touched.insert(e.from);
        touched.insert(e.to);

        const auto &r = e.rule;
        if (r.base_volume == 0 || r.base_access_size == 0 || r.base_access_count == 0)
            flag("bad-rule", subject, "base fields must be positive");
        else {
            if (r.base_volume < r.base_access_size)
                flag("bad-rule", subject, "base volume below base access size");
            std::uint64_t lo = (r.base_access_count - 1) * r.base_access_size;
            std::uint64_t hi = r.base_access_count * r.base_access_size;
            if (!(r.base_volume > lo && r.base_volume <= hi))
                flag("bad-rule", subject, "access count does not cover volume within one access");
        }
    }
    if (!has_source_edge)
        flag("no-source-edge", tpl.name, "no edge from the external source");
    if (!has_sink_edge)
        flag("no-sink-edge", tpl.name, "no edge to the external sink");
    for (const auto &name : names)
        if (!touched.count(name))
            flag("isolated-stage", name, "stage has no edges");

    for (int l = 0; l <= max_level; ++l) {
        bool any = false;
        for (const auto &s : tpl.stages)
            if (s.level == l) { any = true; break; }
        if (!any)
            flag("empty-level", std::to_string(l), "no stage at this level");
    }
    return out;
}

edge_props apply_rule(const scaling_rule &rule, access_pattern pattern, const scale_point &scale) {
    if (scale.data_scale <= 0.0)
        throw error(errc::invalid_workflow, "data_scale must be positive");
    if (scale.task_scale <= 0)
        throw error(errc::invalid_workflow, "task_scale must be positive");

    long double v = static_cast<long double>(rule.base_volume);
    switch (rule.kind) {
    case rule_kind::constant:
        break;
    case rule_kind::volume_linear_in_data_scale:
        v *= static_cast<long double>(scale.data_scale);
        break;
    case rule_kind::volume_inverse_in_task_scale:
        v /= static_cast<long double>(scale.task_scale);
        break;
    case rule_kind::access_size_fixed_volume_linear:
        v = v * static_cast<long double>(scale.data_scale) / static_cast<long double>(scale.task_scale);
        break;
    }
    constexpr long double max_bytes = 9.0e18L; // stays clear of uint64 wraparound
    if (!(v < max_bytes))
        throw error(errc::scale_overflow, "scaled volume exceeds representable bytes");

    edge_props p;
    p.pattern = pattern;
    p.volume = static_cast<std::uint64_t>(std::ceil(v));
    if (p.volume == 0) p.volume = 1; // partial bytes still occupy one
    p.access_size = rule.base_access_size;
    p.access_count = (p.volume + p.access_size - 1) / p.access_size;
    return p;
}

projected_dag project(const workflow_template &tpl, const scale_point &scale) {
    auto problems = validate(tpl);
    if (!problems.empty()) {
        std::ostringstream os;
        os << tpl.name << " has " << problems.size() << " violation(s); first: ["
           << problems.front().code << "] " << problems.front().subject << ": "
           << problems.front().message;
        throw error(errc::invalid_workflow, os.str());
    }

    projected_dag dag;
    dag.template_name = tpl.name;
    dag.tiers = tpl.tiers;
    dag.initial_data_tier = tpl.initial_data_tier;
    dag.final_data_tier = tpl.final_data_tier;
    dag.scale = scale;

    int max_level = 0;
    for (const auto &s : tpl.stages) max_level = std::max(max_level, s.level);
    dag.levels.assign(static_cast<std::size_t>(max_level) + 1, {});
    for (const auto &s : tpl.stages) {
        dag.stages.push_back({s.name, s.level});
        dag.levels[static_cast<std::size_t>(s.level)].push_back(s.name);
        auto cand = s.tiers;
        std::sort(cand.begin(), cand.end(), [&](const std::string &a, const std::string &b) {
            return find_tier(tpl.tiers, a).speed_rank < find_tier(tpl.tiers, b).speed_rank;
        });
        dag.candidates[s.name] = std::move(cand);
    }
    std::sort(dag.stages.begin(), dag.stages.end(),
              [](const stage_id &a, const stage_id &b) { return a.name < b.name; });
    for (auto &lvl : dag.levels) std::sort(lvl.begin(), lvl.end());

    for (const auto &e : tpl.edges) {
        projected_edge pe;
        pe.from = e.from;
        pe.to = e.to;
        pe.props = apply_rule(e.rule, e.pattern, scale);
        pe.props.direction =
            (e.to == external_sink) ? edge_direction::producer : edge_direction::consumer;
        dag.edges.push_back(std::move(pe));
    }
    return dag;
}

namespace {

scaling_rule kb_rule(rule_kind kind, std::uint64_t volume_kb, std::uint64_t access_kb) {
    scaling_rule r;
    r.kind = kind;
    r.base_volume = volume_kb * 1024ull;
    r.base_access_size = access_kb * 1024ull;
    r.base_access_count = (r.base_volume + r.base_access_size - 1) / r.base_access_size;
    return r;
}

scaling_rule mb_rule(rule_kind kind, std::uint64_t volume_mb, std::uint64_t access_kb) {
    return kb_rule(kind, volume_mb * 1024ull, access_kb);
}

tier_catalog default_tiers() {
    return {
        {"tmpfs", tier_class::local, 1},
        {"ssd", tier_class::local, 2},
        {"beegfs", tier_class::remote, 3},
    };
}

std::vector<std::string> all_tier_names() { return {"tmpfs", "ssd", "beegfs"}; }

workflow_template make_genome5() {
    workflow_template t;
    t.name = "genome5";
    t.tiers = default_tiers();
    t.initial_data_tier = "beegfs";
    t.final_data_tier = "beegfs";
    t.stages = {
        {"individuals", 0, all_tier_names()},
        {"sifting", 0, all_tier_names()},
        {"individuals_merge", 1, all_tier_names()},
        {"frequency", 2, all_tier_names()},
        {"mutation_overlap", 2, all_tier_names()},
    };
    auto seq = access_pattern::sequential;
    auto rnd = access_pattern::random_access;
    t.edges = {
        {external_source, "individuals",
         mb_rule(rule_kind::access_size_fixed_volume_linear, 15360, 8192), seq},
        {external_source, "sifting", mb_rule(rule_kind::volume_linear_in_data_scale, 8, 1024), seq},
        {"individuals", "individuals_merge",
         mb_rule(rule_kind::volume_linear_in_data_scale, 256, 4096), seq},
        {"individuals_merge", "frequency", mb_rule(rule_kind::constant, 2, 512), seq},
        {"individuals_merge", "mutation_overlap", kb_rule(rule_kind::constant, 512, 128), rnd},
        {"sifting", "frequency", kb_rule(rule_kind::constant, 256, 64), rnd},
        {"sifting", "mutation_overlap", kb_rule(rule_kind::constant, 256, 64), rnd},
        {"frequency", external_sink, kb_rule(rule_kind::constant, 256, 128), seq},
        {"mutation_overlap", external_sink, kb_rule(rule_kind::constant, 256, 128), seq},
    };
    return t;
}

workflow_template make_chain9() {
    workflow_template t;
    t.name = "chain9";
    t.tiers = default_tiers();
    t.initial_data_tier = "beegfs";
    t.final_data_tier = "beegfs";
    auto seq = access_pattern::sequential;
    std::vector<std::string> names;
    for (int i = 1; i <= 9; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "step%02d", i);
        names.emplace_back(buf);
        t.stages.push_back({names.back(), i - 1, all_tier_names()});
    }
    t.edges.push_back({external_source, names[0],
                       mb_rule(rule_kind::volume_linear_in_data_scale, 1024, 1024), seq});
    for (int i = 0; i < 8; ++i)
        t.edges.push_back({names[static_cast<std::size_t>(i)], names[static_cast<std::size_t>(i) + 1],
                           mb_rule(rule_kind::volume_linear_in_data_scale, 512 - 32 * i, 512), seq});
    t.edges.push_back({names[8], external_sink, mb_rule(rule_kind::constant, 64, 256), seq});
    return t;
}

workflow_template make_mlloop4(int iterations) {
    if (iterations < 1)
        throw error(errc::unknown_template, "mlloop4 iteration count must be positive");
    workflow_template t;
    t.name = "mlloop4";
    t.tiers = default_tiers();
    t.initial_data_tier = "beegfs";
    t.final_data_tier = "beegfs";
    auto seq = access_pattern::sequential;
    auto rnd = access_pattern::random_access;
    const char *body[4] = {"simulation", "aggregation", "training", "inference"};
    std::string prev;
    for (int it = 0; it < iterations; ++it) {
        for (int s = 0; s < 4; ++s) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s_%02d", body[s], it + 1);
            t.stages.push_back({buf, it * 4 + s, all_tier_names()});
        }
        auto at = [&](int s) { return t.stages[static_cast<std::size_t>(it * 4 + s)].name; };
        if (it == 0)
            t.edges.push_back({external_source, at(0),
                               mb_rule(rule_kind::volume_linear_in_data_scale, 256, 1024), seq});
        else
            t.edges.push_back({prev, at(0), mb_rule(rule_kind::constant, 96, 512), seq});
        t.edges.push_back({at(0), at(1),
                           mb_rule(rule_kind::access_size_fixed_volume_linear, 768, 1024), seq});
        t.edges.push_back({at(1), at(2), mb_rule(rule_kind::volume_linear_in_data_scale, 384, 512), rnd});
        t.edges.push_back({at(2), at(3), mb_rule(rule_kind::constant, 128, 512), seq});
        prev = at(3);
    }
    t.edges.push_back({prev, external_sink, mb_rule(rule_kind::constant, 32, 256), seq});
    return t;
}

} // namespace

workflow_template builtin_template(const std::string &name, int iterations) {
    if (name == "genome5") return make_genome5();
    if (name == "chain9") return make_chain9();
    if (name == "mlloop4") return make_mlloop4(iterations);
    throw error(errc::unknown_template, name);
}

namespace {

void expect_keys(const json &obj, const std::string &where,
                 std::initializer_list<const char *> keys) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char *k : keys)
            if (it.key() == k) { known = true; break; }
        if (!known)
            throw error(errc::parse_error, where + ": unknown key '" + it.key() + "'");
    }
}

std::string need_string(const json &obj, const char *key, const std::string &where) {
    if (!obj.contains(key) || !obj[key].is_string())
        throw error(errc::parse_error, where + ": missing string '" + key + "'");
    return obj[key].get<std::string>();
}

std::uint64_t need_u64(const json &obj, const char *key, const std::string &where) {
    if (!obj.contains(key) || !obj[key].is_number_unsigned())
        throw error(errc::parse_error, where + ": missing non-negative integer '" + key + "'");
    return obj[key].get<std::uint64_t>();
}

rule_kind parse_kind(const std::string &s) {
    if (s == "constant") return rule_kind::constant;
    if (s == "volume_linear_in_data_scale") return rule_kind::volume_linear_in_data_scale;
    if (s == "volume_inverse_in_task_scale") return rule_kind::volume_inverse_in_task_scale;
    if (s == "access_size_fixed_volume_linear") return rule_kind::access_size_fixed_volume_linear;
    throw error(errc::unknown_rule_kind, s);
}

const char *kind_name(rule_kind k) {
    switch (k) {
    case rule_kind::constant: return "constant";
    case rule_kind::volume_linear_in_data_scale: return "volume_linear_in_data_scale";
    case rule_kind::volume_inverse_in_task_scale: return "volume_inverse_in_task_scale";
    case rule_kind::access_size_fixed_volume_linear: return "access_size_fixed_volume_linear";
    }
    return "constant";
}

access_pattern parse_pattern(const std::string &s, const std::string &where) {
    if (s == "sequential") return access_pattern::sequential;
    if (s == "random") return access_pattern::random_access;
    throw error(errc::parse_error, where + ": pattern must be sequential or random");
}

const char *pattern_name(access_pattern p) {
    return p == access_pattern::sequential ? "sequential" : "random";
}

} // namespace

workflow_template parse_template(const std::string &json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception &e) {
        throw error(errc::parse_error, std::string("workflow spec: ") + e.what());
    }
    if (!root.is_object())
        throw error(errc::parse_error, "workflow spec: top level must be an object");
    expect_keys(root, "workflow spec",
                {"name", "tiers", "stages", "edges", "initial_data_tier", "final_data_tier"});

    workflow_template t;
    t.name = root.contains("name") ? need_string(root, "name", "workflow spec") : "workflow";

    if (!root.contains("tiers") || !root["tiers"].is_array())
        throw error(errc::parse_error, "workflow spec: missing 'tiers' array");
    for (const auto &jt : root["tiers"]) {
        expect_keys(jt, "tier", {"name", "class", "speed_rank"});
        tier_id tid;
        tid.name = need_string(jt, "name", "tier");
        auto cls = need_string(jt, "class", "tier " + tid.name);
        if (cls == "local") tid.cls = tier_class::local;
        else if (cls == "remote") tid.cls = tier_class::remote;
        else throw error(errc::parse_error, "tier " + tid.name + ": class must be local or remote");
        tid.speed_rank = static_cast<int>(need_u64(jt, "speed_rank", "tier " + tid.name));
        t.tiers.push_back(std::move(tid));
    }

    if (!root.contains("stages") || !root["stages"].is_array())
        throw error(errc::parse_error, "workflow spec: missing 'stages' array");
    for (const auto &js : root["stages"]) {
        expect_keys(js, "stage", {"name", "level", "tiers"});
        template_stage s;
        s.name = need_string(js, "name", "stage");
        if (!js.contains("level") || !js["level"].is_number_integer())
            throw error(errc::parse_error, "stage " + s.name + ": missing integer 'level'");
        s.level = js["level"].get<int>();
        if (!js.contains("tiers") || !js["tiers"].is_array())
            throw error(errc::parse_error, "stage " + s.name + ": missing 'tiers' array");
        for (const auto &jt : js["tiers"]) {
            if (!jt.is_string())
                throw error(errc::parse_error, "stage " + s.name + ": tier names must be strings");
            s.tiers.push_back(jt.get<std::string>());
        }
        t.stages.push_back(std::move(s));
    }

    if (!root.contains("edges") || !root["edges"].is_array())
        throw error(errc::parse_error, "workflow spec: missing 'edges' array");
    for (const auto &je : root["edges"]) {
        expect_keys(je, "edge", {"from", "to", "rule", "pattern"});
        template_edge e;
        e.from = need_string(je, "from", "edge");
        e.to = need_string(je, "to", "edge");
        std::string where = "edge " + e.from + "->" + e.to;
        e.pattern = parse_pattern(need_string(je, "pattern", where), where);
        if (!je.contains("rule") || !je["rule"].is_object())
            throw error(errc::parse_error, where + ": missing 'rule' object");
        const auto &jr = je["rule"];
        expect_keys(jr, where + " rule",
                    {"kind", "base_access_count", "base_access_size_bytes", "base_volume_bytes"});
        e.rule.kind = parse_kind(need_string(jr, "kind", where));
        e.rule.base_access_count = need_u64(jr, "base_access_count", where);
        e.rule.base_access_size = need_u64(jr, "base_access_size_bytes", where);
        e.rule.base_volume = need_u64(jr, "base_volume_bytes", where);
        t.edges.push_back(std::move(e));
    }

    t.initial_data_tier = need_string(root, "initial_data_tier", "workflow spec");
    t.final_data_tier = need_string(root, "final_data_tier", "workflow spec");
    return t;
}

std::string serialize_template(const workflow_template &t) {
    json root;
    root["name"] = t.name;
    root["tiers"] = json::array();
    for (const auto &tid : t.tiers)
        root["tiers"].push_back({{"name", tid.name},
                                 {"class", tid.cls == tier_class::local ? "local" : "remote"},
                                 {"speed_rank", tid.speed_rank}});
    root["stages"] = json::array();
    for (const auto &s : t.stages)
        root["stages"].push_back({{"name", s.name}, {"level", s.level}, {"tiers", s.tiers}});
    root["edges"] = json::array();
    for (const auto &e : t.edges)
        root["edges"].push_back(
            {{"from", e.from},
             {"to", e.to},
             {"rule",
              {{"kind", kind_name(e.rule.kind)},
               {"base_access_count", e.rule.base_access_count},
               {"base_access_size_bytes", e.rule.base_access_size},
               {"base_volume_bytes", e.rule.base_volume}}},
             {"pattern", pattern_name(e.pattern)}});
    root["initial_data_tier"] = t.initial_data_tier;
    root["final_data_tier"] = t.final_data_tier;
    return root.dump(2) + "\n";
}

std::string serialize_projected(const projected_dag &dag) {
    json root;
    root["template"] = dag.template_name;
    root["data_scale"] = dag.scale.data_scale;
    root["task_scale"] = dag.scale.task_scale;
    root["initial_data_tier"] = dag.initial_data_tier;
    root["final_data_tier"] = dag.final_data_tier;
    root["levels"] = dag.levels;
    root["stages"] = json::array();
    for (const auto &s : dag.stages)
        root["stages"].push_back(
            {{"name", s.name}, {"level", s.level}, {"tiers", dag.candidates.at(s.name)}});
    root["edges"] = json::array();
    for (const auto &e : dag.edges)
        root["edges"].push_back({{"from", e.from},
                                 {"to", e.to},
                                 {"access_count", e.props.access_count},
                                 {"access_size_bytes", e.props.access_size},
                                 {"volume_bytes", e.props.volume},
                                 {"pattern", pattern_name(e.props.pattern)}});
    return root.dump(2) + "\n";
}

workflow_template load_template_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw error(errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_template(buf.str());
}

} // namespace tierplan
