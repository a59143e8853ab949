#include "tierplan/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tierplan/baselines.hpp"
#include "tierplan/cart.hpp"
#include "tierplan/config_space.hpp"
#include "tierplan/qos.hpp"
#include "tierplan/regions.hpp"
#include "tierplan/report.hpp"
#include "tierplan/synthetic.hpp"
#include "tierplan/workflow.hpp"

namespace tierplan {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void write_file(const fs::path &path, const std::string &content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw error(errc::io_error, "cannot open for writing: " + path.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw error(errc::io_error, "short write: " + path.string());
}

void emit(const std::string &out_path, const std::string &content, std::ostream &out) {
    if (out_path.empty())
        out << content;
    else
        write_file(out_path, content);
}

struct template_opts {
    std::string spec_path;
    std::string builtin;
    int iterations = 2;
};

struct scale_opts {
    std::vector<double> scales{1.0};
    double data_scale = 0.0; // 0 = follow --scale
    int nodes = 0;           // 0 = follow --scale
};

void add_template_flags(CLI::App *cmd, template_opts &t) {
    auto *spec = cmd->add_option("--spec", t.spec_path, "workflow file (JSON)");
    auto *builtin =
        cmd->add_option("--builtin", t.builtin, "built-in workflow: genome5, chain9, mlloop4");
    cmd->add_option("--iterations", t.iterations, "loop count for mlloop4")
        ->check(CLI::PositiveNumber);
    spec->excludes(builtin);
    builtin->excludes(spec);
}

void add_scale_flags(CLI::App *cmd, scale_opts &s, bool many) {
    if (many)
        cmd->add_option("--scales", s.scales, "scale factors, one projection each")
            ->delimiter(',');
    else
        cmd->add_option("--scale", s.scales, "scale factor")->expected(1);
    cmd->add_option("--data-scale", s.data_scale, "override the data scale component");
    cmd->add_option("--nodes", s.nodes, "override the task scale (node count)");
}

workflow_template resolve_template(const template_opts &t) {
    if (!t.spec_path.empty()) return load_template_file(t.spec_path);
    if (!t.builtin.empty()) return builtin_template(t.builtin, t.iterations);
    throw error(errc::parse_error, "one of --spec or --builtin is required");
}

scale_point resolve_scale(const scale_opts &s, double scale) {
    scale_point sp;
    sp.data_scale = s.data_scale > 0.0 ? s.data_scale : scale;
    sp.task_scale = s.nodes > 0 ? s.nodes : static_cast<int>(std::llround(scale));
    if (sp.task_scale < 1) sp.task_scale = 1;
    return sp;
}

struct region_flag_set {
    std::uint64_t seed = 42;
    cross_fit_params params;
};

void add_region_flags(CLI::App *cmd, region_flag_set &r) {
    cmd->add_option("--seed", r.seed, "random seed");
    cmd->add_option("--folds", r.params.folds, "cross-fit folds (K)")->check(CLI::PositiveNumber);
    cmd->add_option("--repeats", r.params.repeats, "cross-fit repeats (R)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--min-leaf", r.params.cart.min_leaf, "smallest tree leaf")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-depth", r.params.cart.max_depth, "tree depth limit")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--delta", r.params.sep.delta, "acceptable relative spread");
    cmd->add_option("--g-floor", r.params.sep.g_floor, "separation threshold floor");
    cmd->add_option("--g-cap", r.params.sep.g_cap, "separation threshold cap");
    cmd->add_option("--sep-min-leaf", r.params.sep.min_leaf_eval,
                    "smallest held-out group scored for separation");
    cmd->add_option("--threads", r.params.threads, "fold-level parallelism")
        ->check(CLI::PositiveNumber);
}

storage_profile resolve_profile(const std::string &path, bool demo) {
    if (demo) return demo_profile();
    if (path.empty()) throw error(errc::parse_error, "one of --profile or --demo-profile is required");
    return load_profile_file(path);
}

std::string scale_tag(const scale_point &sp) {
    return "d" + format_double(sp.data_scale) + "_n" + std::to_string(sp.task_scale);
}

// Builds the batched feature matrix for one or more evaluated tables. With a
// single unlabeled table no scale column is added; labeled tables get their
// label as the numeric scale column.
feature_matrix load_features(const std::vector<std::string> &inputs,
                             const std::vector<double> &table_scales, const tier_catalog &tiers) {
    if (inputs.empty()) throw error(errc::parse_error, "at least one --input table is required");
    if (!table_scales.empty() && table_scales.size() != inputs.size())
        throw error(errc::length_mismatch, "--table-scale count must match --input count");
    if (table_scales.empty() && inputs.size() > 1)
        throw error(errc::parse_error, "multiple tables need --table-scale labels");
    std::optional<feature_matrix> acc;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto configs = load_evaluated_file(inputs[i]);
        std::optional<double> scale;
        if (!table_scales.empty()) scale = table_scales[i];
        auto X = encode(configs, tiers, scale);
        acc = acc ? concat(*acc, X) : std::move(X);
    }
    return *acc;
}

json recommendation_json(const recommendation &rec) { return json::parse(serialize_recommendation(rec)); }

json sensitivity_json(const sensitivity_report &rep) {
    json j;
    j["epsilon"] = rep.epsilon;
    json regions = json::array();
    for (const auto &r : rep.regions) {
        json stages = json::array();
        for (const auto &s : r.stages)
            stages.push_back({{"stage", s.stage},
                              {"dont_care", s.dont_care},
                              {"max_rel_swing", s.max_rel_swing}});
        regions.push_back({{"region", r.region_index}, {"stages", stages}});
    }
    j["regions"] = regions;
    json overall = json::array();
    for (const auto &s : rep.overall)
        overall.push_back(
            {{"stage", s.stage}, {"dont_care", s.dont_care}, {"max_rel_swing", s.max_rel_swing}});
    j["overall"] = overall;
    json freq = json::array();
    for (const auto &[stage, tier, share] : rep.trace_frequency)
        freq.push_back({{"stage", stage}, {"tier", tier}, {"share", share}});
    j["trace_frequency"] = freq;
    return j;
}

json robustness_json(const robustness_report &rep) {
    json j;
    j["trace_stable"] = rep.trace_stable;
    j["worst_case_delta_s"] = rep.worst_case_delta_s;
    j["worst_case_rel_delta"] = rep.worst_case_rel_delta;
    if (rep.rank_bound_known)
        j["rank_shift_bound"] = rep.rank_shift_bound;
    else
        j["rank_shift_bound"] = nullptr;
    return j;
}

int cmd_project(const template_opts &t, const scale_opts &s, const std::string &out_path,
                const std::string &out_dir, std::ostream &out) {
    auto tpl = resolve_template(t);
    if (!out_path.empty() && s.scales.size() != 1)
        throw error(errc::parse_error, "--out expects exactly one scale; use --out-dir");
    for (double sc : s.scales) {
        auto dag = project(tpl, resolve_scale(s, sc));
        std::string text = serialize_projected(dag);
        if (!out_path.empty()) {
            write_file(out_path, text);
            out << out_path << '\n';
        } else if (!out_dir.empty()) {
            fs::path p = fs::path(out_dir) / ("projected_" + scale_tag(dag.scale) + ".json");
            write_file(p, text);
            out << p.string() << '\n';
        } else {
            out << text;
        }
    }
    return 0;
}

int cmd_evaluate(const template_opts &t, const scale_opts &s, const std::string &profile_path,
                 bool demo_prof, std::uint64_t tpn, std::uint64_t cap, unsigned threads,
                 const std::string &out_path, std::ostream &out) {
    auto tpl = resolve_template(t);
    auto profile = resolve_profile(profile_path, demo_prof);
    auto dag = project(tpl, resolve_scale(s, s.scales.at(0)));
    auto evals = evaluate_all(dag, profile, tpn, cap, threads);
    emit(out_path, serialize_evaluated_csv(evals), out);
    return 0;
}

int cmd_regions(const template_opts &t, const std::vector<std::string> &inputs,
                const std::vector<double> &table_scales, const region_flag_set &r,
                const std::string &model_path, const std::string &membership_path,
                const std::string &dot_path, std::size_t top_k, std::optional<double> epsilon,
                std::ostream &out) {
    auto tpl = resolve_template(t);
    auto X = load_features(inputs, table_scales, tpl.tiers);
    auto model = mine_regions(X, r.seed, r.params);
    write_file(model_path, serialize_region_model(model));
    write_file(membership_path, membership_csv(model));
    scale_point sp{1.0, 1};
    auto dag = project(tpl, sp);
    write_file(dot_path, region_glyphs_dot(dag, model, top_k));
    out << "regions: " << model.regions.size() << "\n";
    out << "alpha_star: " << format_double(model.alpha_star) << "\n";
    if (epsilon) {
        auto rep = epsilon_check(model, *epsilon);
        for (const auto &e : rep.regions)
            out << "region " << e.region_index << " rel_spread "
                << format_double(e.max_rel_spread) << (e.pass ? " pass" : " fail") << "\n";
        out << "epsilon " << format_double(rep.epsilon) << ": "
            << (rep.all_pass ? "all regions pass" : "some regions fail") << "\n";
    }
    return 0;
}

int cmd_compare(const template_opts &t, const scale_opts &s, const std::string &input,
                const std::string &model_path, const std::string &out_path, std::ostream &out) {
    auto tpl = resolve_template(t);
    auto dag = project(tpl, resolve_scale(s, s.scales.at(0)));
    auto configs = load_evaluated_file(input);
    auto model = load_region_model_file(model_path);
    emit(out_path, comparison_csv(compare_policies(dag, configs, model)), out);
    return 0;
}

int cmd_query(const std::string &query_path, const std::vector<std::string> &inputs,
              const std::vector<int> &table_nodes, const std::vector<std::string> &model_paths,
              const std::string &out_path, std::ostream &out) {
    auto query = load_query_file(query_path);
    if (inputs.empty()) throw error(errc::parse_error, "at least one --input table is required");
    if (!table_nodes.empty() && table_nodes.size() != inputs.size())
        throw error(errc::length_mismatch, "--table-nodes count must match --input count");
    if (!model_paths.empty() && model_paths.size() != 1 && model_paths.size() != inputs.size())
        throw error(errc::length_mismatch, "--model count must be 1 or match --input count");
    std::vector<region_model> models;
    models.reserve(model_paths.size());
    for (const auto &p : model_paths) models.push_back(load_region_model_file(p));
    std::vector<scale_dataset> data(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        data[i].task_scale = table_nodes.empty() ? 1 : table_nodes[i];
        data[i].configs = load_evaluated_file(inputs[i]);
        if (models.size() == 1)
            data[i].model = &models[0];
        else if (!models.empty())
            data[i].model = &models[i];
    }
    auto rec = answer(query, data);
    emit(out_path, serialize_recommendation(rec), out);
    if (!out_path.empty()) out << (rec.matched ? "matched\n" : "denied\n");
    return 0;
}

int cmd_demo(const std::string &out_dir, std::uint64_t seed, unsigned threads, std::size_t top_k,
             double epsilon, std::ostream &out) {
    fs::path dir(out_dir);
    fs::create_directories(dir);
    auto tpl = builtin_template("genome5");
    write_file(dir / "workflow.json", serialize_template(tpl));
    auto profile = demo_profile();
    write_file(dir / "profile.csv", serialize_profile_csv(profile));

    const scale_point primary_scale = demo_scale();
    projected_dag primary_dag;
    std::vector<scale_dataset> data;
    for (const auto &sp : demo_scales()) {
        auto dag = project(tpl, sp);
        write_file(dir / ("projected_" + scale_tag(sp) + ".json"), serialize_projected(dag));
        auto evals = evaluate_all(dag, profile, 1, 1000000, threads);
        write_file(dir / ("evaluated_" + scale_tag(sp) + ".csv"), serialize_evaluated_csv(evals));
        if (sp.task_scale == primary_scale.task_scale) primary_dag = dag;
        scale_dataset d;
        d.task_scale = sp.task_scale;
        d.configs = std::move(evals);
        data.push_back(std::move(d));
    }
    const auto &primary =
        std::find_if(data.begin(), data.end(), [&](const scale_dataset &d) {
            return d.task_scale == primary_scale.task_scale;
        })->configs;

    cross_fit_params params;
    params.threads = threads;
    auto X = encode(primary, tpl.tiers);
    auto model = mine_regions(X, seed, params);
    write_file(dir / "region_model.json", serialize_region_model(model));
    write_file(dir / "membership.csv", membership_csv(model));
    write_file(dir / "regions.dot", region_glyphs_dot(primary_dag, model, top_k));

    auto eps = epsilon_check(model, epsilon);
    std::string eps_text;
    for (const auto &e : eps.regions)
        eps_text += "region " + std::to_string(e.region_index) + " rel_spread " +
                    format_double(e.max_rel_spread) + (e.pass ? " pass" : " fail") + "\n";
    eps_text += std::string("overall: ") + (eps.all_pass ? "pass" : "fail") + "\n";
    write_file(dir / "epsilon_report.txt", eps_text);

    auto scores = compare_policies(primary_dag, primary, model);
    write_file(dir / "comparison.csv", comparison_csv(scores));

    auto sens = sensitivity_classify(primary, model, epsilon);
    write_file(dir / "sensitivity.json", sensitivity_json(sens).dump(2) + "\n");

    std::vector<double> population(primary.size());
    for (std::size_t i = 0; i < primary.size(); ++i) population[i] = primary[i].makespan;
    auto rob = robustness(primary.front(), primary_dag, profile, 0.1, population);
    write_file(dir / "robustness.json", robustness_json(rob).dump(2) + "\n");

    for (auto &d : data)
        if (d.task_scale == primary_scale.task_scale) d.model = &model;

    qos_query q1;
    q1.kind = query_kind::best_under_node_cap;
    q1.candidate_nodes = {2, 4, 8};
    q1.max_nodes = 8;
    auto rec1 = answer(q1, data);
    write_file(dir / "query_capacity.json", serialize_recommendation(rec1));

    qos_query q2;
    q2.kind = query_kind::best_within_tiers;
    q2.allowed_tiers = {"tmpfs", "ssd"};
    q2.scale = primary_scale.task_scale;
    auto rec2 = answer(q2, data);
    write_file(dir / "query_tiers.json", serialize_recommendation(rec2));

    qos_query q3;
    q3.kind = query_kind::deadline_excluding;
    q3.excluded_tiers = {"tmpfs"};
    q3.deadline_s = 2.0;
    q3.scale = primary_scale.task_scale;
    auto rec3 = answer(q3, data);
    write_file(dir / "query_deadline_denied.json", serialize_recommendation(rec3));
    qos_query q3b = q3;
    q3b.deadline_s = q3.deadline_s + rec3.deadline_gap_s;
    auto rec3b = answer(q3b, data);
    write_file(dir / "query_deadline_relaxed.json", serialize_recommendation(rec3b));

    qos_query q4;
    q4.kind = query_kind::tier_unavailable;
    q4.excluded_tiers = {"ssd"};
    q4.scale = primary_scale.task_scale;
    auto rec4 = answer(q4, data);
    write_file(dir / "query_outage.json", serialize_recommendation(rec4));

    std::string summary;
    summary += "configs_per_scale: " + std::to_string(primary.size()) + "\n";
    summary += "regions: " + std::to_string(model.regions.size()) + "\n";
    summary += "alpha_star: " + format_double(model.alpha_star) + "\n";
    summary += std::string("epsilon_all_pass: ") + (eps.all_pass ? "true" : "false") + "\n";
    for (const auto &sc : scores)
        summary += "pc_" + sc.policy + ": " + format_double(sc.pc) + "\n";
    summary += std::string("q1: ") + (rec1.matched ? "matched" : "denied") + "\n";
    summary += std::string("q2: ") + (rec2.matched ? "matched" : "denied") + "\n";
    summary += std::string("q3: ") + (rec3.matched ? "matched" : "denied") +
               " gap_s " + format_double(rec3.deadline_gap_s) + "\n";
    summary += std::string("q3_relaxed: ") + (rec3b.matched ? "matched" : "denied") + "\n";
    summary += std::string("q4: ") + (rec4.matched ? "matched" : "denied") + "\n";
    write_file(dir / "summary.txt", summary);
    out << summary;
    out << "output_dir: " << dir.string() << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"storage tier placement explorer: evaluates workflow I/O placements, "
                 "mines performance regions, answers placement queries"};
    app.name("tierplan");
    app.require_subcommand(1);
    int rc = 0;

    auto *project_cmd = app.add_subcommand("project", "expand a workflow to concrete scales");
    template_opts pj_t;
    scale_opts pj_s;
    std::string pj_out, pj_out_dir;
    add_template_flags(project_cmd, pj_t);
    add_scale_flags(project_cmd, pj_s, true);
    project_cmd->add_option("--out", pj_out, "single output file (one scale only)");
    project_cmd->add_option("--out-dir", pj_out_dir, "directory for per-scale outputs");
    project_cmd->callback([&] { rc = cmd_project(pj_t, pj_s, pj_out, pj_out_dir, out); });

    auto *eval_cmd = app.add_subcommand("evaluate", "time every placement of one scale");
    template_opts ev_t;
    scale_opts ev_s;
    std::string ev_profile, ev_out;
    bool ev_demo = false;
    std::uint64_t ev_tpn = 1, ev_cap = 250000;
    unsigned ev_threads = 1;
    add_template_flags(eval_cmd, ev_t);
    add_scale_flags(eval_cmd, ev_s, false);
    eval_cmd->add_option("--profile", ev_profile, "transfer-rate profile CSV");
    eval_cmd->add_flag("--demo-profile", ev_demo, "use the built-in demo profile");
    eval_cmd->add_option("--tpn", ev_tpn, "tasks per node")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--cap", ev_cap, "refuse larger placement spaces")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--threads", ev_threads, "evaluation parallelism")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--out", ev_out, "output CSV path (default stdout)");
    eval_cmd->callback([&] {
        rc = cmd_evaluate(ev_t, ev_s, ev_profile, ev_demo, ev_tpn, ev_cap, ev_threads, ev_out, out);
    });

    auto *regions_cmd = app.add_subcommand("regions", "mine performance regions from evaluated tables");
    template_opts rg_t;
    std::vector<std::string> rg_inputs;
    std::vector<double> rg_table_scales;
    region_flag_set rg_r;
    std::string rg_model = "region_model.json";
    std::string rg_membership = "membership.csv";
    std::string rg_dot = "regions.dot";
    std::size_t rg_top_k = 5;
    double rg_eps = -1.0;
    add_template_flags(regions_cmd, rg_t);
    regions_cmd->add_option("--input", rg_inputs, "evaluated table CSV (repeatable)");
    regions_cmd->add_option("--table-scale", rg_table_scales,
                            "scale label per input table (repeatable)");
    add_region_flags(regions_cmd, rg_r);
    regions_cmd->add_option("--out", rg_model, "region model output path");
    regions_cmd->add_option("--membership", rg_membership, "membership CSV output path");
    regions_cmd->add_option("--dot", rg_dot, "glyph DOT output path");
    regions_cmd->add_option("--top-k", rg_top_k, "regions rendered in the DOT output");
    regions_cmd->add_option("--epsilon", rg_eps, "report per-region relative spread against this bound");
    regions_cmd->callback([&] {
        std::optional<double> eps;
        if (rg_eps >= 0.0) eps = rg_eps;
        rc = cmd_regions(rg_t, rg_inputs, rg_table_scales, rg_r, rg_model, rg_membership, rg_dot,
                         rg_top_k, eps, out);
    });

    auto *compare_cmd = app.add_subcommand("compare", "score placement policies against measurements");
    template_opts cp_t;
    scale_opts cp_s;
    std::string cp_input, cp_model, cp_out;
    add_template_flags(compare_cmd, cp_t);
    add_scale_flags(compare_cmd, cp_s, false);
    compare_cmd->add_option("--input", cp_input, "evaluated table CSV")->required();
    compare_cmd->add_option("--model", cp_model, "region model file")->required();
    compare_cmd->add_option("--out", cp_out, "output CSV path (default stdout)");
    compare_cmd->callback([&] { rc = cmd_compare(cp_t, cp_s, cp_input, cp_model, cp_out, out); });

    auto *query_cmd = app.add_subcommand("query", "answer a placement query against evaluated tables");
    std::string qr_query, qr_out;
    std::vector<std::string> qr_inputs, qr_models;
    std::vector<int> qr_nodes;
    query_cmd->add_option("--query", qr_query, "query file (JSON)")->required();
    query_cmd->add_option("--input", qr_inputs, "evaluated table CSV (repeatable)");
    query_cmd->add_option("--table-nodes", qr_nodes, "node count per input table (repeatable)");
    query_cmd->add_option("--model", qr_models, "region model file (one, or one per input)");
    query_cmd->add_option("--out", qr_out, "recommendation output path (default stdout)");
    query_cmd->callback([&] { rc = cmd_query(qr_query, qr_inputs, qr_nodes, qr_models, qr_out, out); });

    auto *demo_cmd = app.add_subcommand("demo", "run the whole pipeline on the built-in dataset");
    std::string dm_dir = "demo_out";
    std::uint64_t dm_seed = 42;
    unsigned dm_threads = 1;
    std::size_t dm_top_k = 5;
    double dm_eps = 0.1;
    demo_cmd->add_option("--out-dir", dm_dir, "output directory");
    demo_cmd->add_option("--seed", dm_seed, "random seed");
    demo_cmd->add_option("--threads", dm_threads, "parallelism for evaluation and cross-fit")
        ->check(CLI::PositiveNumber);
    demo_cmd->add_option("--top-k", dm_top_k, "regions rendered in the DOT output");
    demo_cmd->add_option("--epsilon", dm_eps, "relative spread bound for the region report");
    demo_cmd->callback([&] { rc = cmd_demo(dm_dir, dm_seed, dm_threads, dm_top_k, dm_eps, out); });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError &e) {
        return app.exit(e, out, err);
    } catch (const error &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}

} // namespace tierplan
