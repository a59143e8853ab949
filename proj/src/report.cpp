#include "tierplan/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tierplan/config_space.hpp"

namespace tierplan {

namespace {

double concordance_of(const ordering &order, const std::vector<evaluated_config> &configs) {
    std::vector<double> makespans(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) makespans[i] = configs[i].makespan;
    return pairwise_concordance(order, makespans);
}

} // namespace

std::vector<policy_score> compare_policies(const projected_dag &dag,
                                           const std::vector<evaluated_config> &configs,
                                           const region_model &model) {
    std::vector<policy_score> out;
    out.push_back({"fsf", concordance_of(order_fsf(configs, dag.tiers), configs), 0.0});
    out.push_back({"ltl", concordance_of(order_ltl(configs, dag), configs), 0.0});
    out.push_back({"hybrid", concordance_of(order_hybrid(configs, dag), configs), 0.0});
    out.push_back({"region_model", concordance_of(order_region_model(model, configs), configs), 0.0});
    double pc_region = out.back().pc;
    for (auto &row : out)
        if (row.policy != "region_model") row.pct_worse = (pc_region / row.pc - 1.0) * 100.0;
    return out;
}

std::string comparison_csv(const std::vector<policy_score> &scores) {
    std::string out = "policy,pc,pct_worse_than_region_model\n";
    for (const auto &s : scores) {
        out += s.policy;
        out += ',';
        out += format_double(s.pc);
        out += ',';
        out += std::isfinite(s.pct_worse) ? format_double(s.pct_worse) : "n/a";
        out += '\n';
    }
    return out;
}

std::string region_glyphs_dot(const projected_dag &dag, const region_model &model,
                              std::size_t top_k) {
    std::ostringstream dot;
    dot << "digraph region_glyphs {\n";
    dot << "  rankdir=LR;\n";
    dot << "  node [shape=box, fontname=\"Helvetica\"];\n";
    dot << "  // marker order:";
    std::vector<tier_id> tiers = dag.tiers;
    std::sort(tiers.begin(), tiers.end(),
              [](const tier_id &a, const tier_id &b) { return a.speed_rank < b.speed_rank; });
    for (const auto &t : tiers) dot << ' ' << t.name;
    dot << "\n";
    std::size_t shown = std::min(top_k, model.regions.size());
    for (std::size_t k = 0; k < shown; ++k) {
        const region &r = model.regions[k];
        dot << "  subgraph cluster_r" << k << " {\n";
        dot << "    label=\"region " << r.index << "  median "
            << format_double(r.median_makespan) << "s\";\n";
        for (const auto &st : dag.stages) {
            const std::vector<std::string> *admissible = nullptr;
            for (const auto &[stage, tiers_of_stage] : r.rule.admissible)
                if (stage == st.name) admissible = &tiers_of_stage;
            dot << "    \"r" << k << '_' << st.name << "\" [label=\"" << st.name << ' ';
            for (const auto &t : tiers) {
                bool in = admissible == nullptr ||
                          std::find(admissible->begin(), admissible->end(), t.name) !=
                              admissible->end();
                dot << (in ? "●" : "○");
            }
            dot << "\"];\n";
        }
        for (const auto &e : dag.edges) {
            if (e.from == external_source || e.to == external_sink) continue;
            dot << "    \"r" << k << '_' << e.from << "\" -> \"r" << k << '_' << e.to << "\";\n";
        }
        dot << "  }\n";
    }
    dot << "}\n";
    return dot.str();
}

} // namespace tierplan
