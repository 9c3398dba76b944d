#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "flowplan/gateway.hpp"
#include "flowplan/graph.hpp"
#include "flowplan/plan.hpp"

namespace flowplan {

struct PlannerConfig {
    int k = 5;
    double tau_c = 0.5;
    double tau_s = 0.6;
    std::map<Category, SectionId> category_section_map = {
        {Category::Field, SectionId::Field},
        {Category::TechProblem, SectionId::Background},
        {Category::PriorArt, SectionId::Background},
        {Category::Novelty, SectionId::Summary},
        {Category::Solution, SectionId::DetailedDescription},
        {Category::Implementation, SectionId::DetailedDescription},
        {Category::Embodiment, SectionId::DetailedDescription},
        {Category::Figure, SectionId::DetailedDescription},
        {Category::Effects, SectionId::Effects},
    };
};

// ---------------------------------------------------------------------------
// Fallback clustering by the fixed category -> section map
// ---------------------------------------------------------------------------

inline Plan default_assignment(const ConceptGraph& graph,
                               const PlannerConfig& config = {}) {
    Plan plan;
    for (SectionId section : kAllSections)
        plan.assignments.push_back({section, {}});
    for (const auto* n : graph.sorted_nodes()) {
        SectionId section = config.category_section_map.at(n->category);
        plan.assignments[static_cast<size_t>(section)].node_ids.push_back(n->id);
    }
    for (size_t i = 0; i < plan.assignments.size(); ++i)
        plan.order.push_back(i);
    return plan;
}

// ---------------------------------------------------------------------------
// Gate metrics
// ---------------------------------------------------------------------------

// Internal link density per section: |E_in| / max{1, n(n-1)}.
inline std::pair<std::vector<double>, double> connectivity(
    const Plan& plan, const ConceptGraph& graph) {
    if (!plan_partitions_graph(plan, graph))
        throw std::invalid_argument("plan does not partition the graph");
    std::vector<double> per_section;
    for (const auto& a : plan.assignments) {
        std::set<std::string> ids(a.node_ids.begin(), a.node_ids.end());
        size_t internal = 0;
        for (const auto& e : graph.edges)
            if (ids.count(e.src) && ids.count(e.dst)) ++internal;
        double n = static_cast<double>(ids.size());
        double denom = std::max(1.0, n * (n - 1.0));
        per_section.push_back(static_cast<double>(internal) / denom);
    }
    double mean = 0.0;
    for (double c : per_section) mean += c;
    if (!per_section.empty()) mean /= static_cast<double>(per_section.size());
    return {per_section, mean};
}

// Entropy-based node-type homogeneity: Sim_i = 1 - H(S_i)/ln(9).
// Empty sections score 1 (zero entropy by convention).
inline std::pair<std::vector<double>, double> semantic_consistency(
    const Plan& plan, const ConceptGraph& graph) {
    if (!plan_partitions_graph(plan, graph))
        throw std::invalid_argument("plan does not partition the graph");
    const double h_max = std::log(9.0);
    std::vector<double> per_section;
    for (const auto& a : plan.assignments) {
        if (a.node_ids.empty()) {
            per_section.push_back(1.0);
            continue;
        }
        std::map<Category, size_t> counts;
        for (const auto& id : a.node_ids)
            counts[graph.find_node(id)->category]++;
        double total = static_cast<double>(a.node_ids.size());
        double h = 0.0;
        for (const auto& [cat, count] : counts) {
            double p = static_cast<double>(count) / total;
            h -= p * std::log(p);
        }
        double sim = 1.0 - h / h_max;
        per_section.push_back(std::clamp(sim, 0.0, 1.0));
    }
    double mean = 0.0;
    for (double s : per_section) mean += s;
    if (!per_section.empty()) mean /= static_cast<double>(per_section.size());
    return {per_section, mean};
}

// ---------------------------------------------------------------------------
// Ordering heuristics
// ---------------------------------------------------------------------------

inline std::vector<std::string> ordering_violations(const Plan& plan,
                                                    const ConceptGraph& graph) {
    std::vector<std::string> violations;
    auto section_categories = [&](size_t ordered_idx) {
        std::set<Category> cats;
        for (const auto& id : plan.ordered(ordered_idx).node_ids)
            if (const auto* n = graph.find_node(id)) cats.insert(n->category);
        return cats;
    };
    size_t count = plan.order.size();
    std::vector<std::set<Category>> cats_at(count);
    for (size_t i = 0; i < count; ++i) cats_at[i] = section_categories(i);

    // (a) embodiments must not precede technical problems
    for (size_t i = 0; i < count; ++i) {
        if (!cats_at[i].count(Category::Embodiment)) continue;
        for (size_t j = i + 1; j < count; ++j) {
            if (cats_at[j].count(Category::TechProblem)) {
                violations.push_back(
                    "embodiment section '" +
                    std::string(to_string(plan.ordered(i).section)) +
                    "' ordered before tech-problem section '" +
                    std::string(to_string(plan.ordered(j).section)) + "'");
            }
        }
    }

    // (b) figures must not be dissociated from implementations
    for (size_t i = 0; i < count; ++i) {
        const auto& a = plan.ordered(i);
        std::set<std::string> ids(a.node_ids.begin(), a.node_ids.end());
        bool has_impl = cats_at[i].count(Category::Implementation) > 0;
        for (const auto& id : a.node_ids) {
            const auto* n = graph.find_node(id);
            if (!n || n->category != Category::Figure) continue;
            if (has_impl) continue;
            bool linked = false;
            for (const auto& e : graph.edges) {
                const std::string& other =
                    e.src == id ? e.dst : (e.dst == id ? e.src : std::string{});
                if (other.empty()) continue;
                const auto* o = graph.find_node(other);
                if (o && o->category == Category::Implementation) {
                    linked = true;
                    break;
                }
            }
            if (!linked)
                violations.push_back("figure node " + id +
                                     " dissociated from implementations");
        }
    }

    // (c) global narrative flow: TechProblem -> Solution -> Implementation
    //     -> Effects by first occurrence
    const std::array<Category, 4> flow = {
        Category::TechProblem, Category::Solution, Category::Implementation,
        Category::Effects};
    std::map<Category, size_t> first_at;
    for (size_t i = 0; i < count; ++i)
        for (Category c : flow)
            if (cats_at[i].count(c) && !first_at.count(c)) first_at[c] = i;
    size_t last_pos = 0;
    Category last_cat = Category::TechProblem;
    bool have_last = false;
    for (Category c : flow) {
        auto it = first_at.find(c);
        if (it == first_at.end()) continue;
        if (have_last && it->second < last_pos) {
            violations.push_back(
                "narrative flow: " + std::string(to_string(c)) +
                " first appears before " + std::string(to_string(last_cat)));
        }
        if (!have_last || it->second >= last_pos) {
            last_pos = it->second;
            last_cat = c;
            have_last = true;
        }
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Plan proposal
// ---------------------------------------------------------------------------

inline PromptRequest plan_prompt(const ConceptGraph& graph, int variant) {
    PromptRequest req;
    req.tag = "plan";
    std::string system =
        "You cluster the nodes of a patent concept graph into the five "
        "canonical description sections: Field, Background, Summary, "
        "DetailedDescription, Effects. Every node id must appear in exactly "
        "one section. Return JSON:\n"
        "{\"sections\": [{\"section\": \"Field\", \"node_ids\": [...]}, ...]}\n"
        "Proposal variant " +
        std::to_string(variant) + ": vary the grouping where defensible.";
    req.system_text = std::move(system);
    std::string body = "Nodes:\n";
    for (const auto* n : graph.sorted_nodes()) {
        body += n->id;
        body += " [";
        body += to_string(n->category);
        body += "] ";
        body += n->label;
        body += "\n";
    }
    req.user_text = std::move(body);
    return req;
}

inline std::optional<Plan> parse_plan_reply(const std::string& reply,
                                            const ConceptGraph& graph) {
    auto j = extract_json_object(reply, {"sections"});
    if (!j) return std::nullopt;
    Plan plan;
    try {
        plan = plan_from_json(*j);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    // Ensure all five sections exist exactly once, in canonical order.
    std::map<SectionId, SectionAssignment> by_section;
    for (auto& a : plan.assignments) {
        if (by_section.count(a.section)) return std::nullopt;
        by_section[a.section] = a;
    }
    Plan normalized;
    for (SectionId s : kAllSections) {
        auto it = by_section.find(s);
        normalized.assignments.push_back(
            it != by_section.end() ? it->second : SectionAssignment{s, {}});
    }
    for (size_t i = 0; i < normalized.assignments.size(); ++i)
        normalized.order.push_back(i);
    if (!plan_partitions_graph(normalized, graph)) return std::nullopt;
    return normalized;
}

// Plan 1 is always the deterministic default; plans 2..k come from the
// gateway, degrading to the default on any unusable reply.
inline std::vector<Plan> propose_plans(const ConceptGraph& graph,
                                       Gateway& gateway,
                                       const PlannerConfig& config,
                                       std::vector<std::string>& warnings) {
    std::vector<Plan> plans;
    plans.push_back(default_assignment(graph, config));
    for (int variant = 2; variant <= config.k; ++variant) {
        std::string reply = gateway.complete(plan_prompt(graph, variant)).text;
        auto plan = parse_plan_reply(reply, graph);
        if (!plan) {
            warnings.push_back("plan candidate " + std::to_string(variant) +
                               ": unusable reply; substituting default");
            plans.push_back(default_assignment(graph, config));
        } else {
            plans.push_back(std::move(*plan));
        }
    }
    return plans;
}

// ---------------------------------------------------------------------------
// Gating
// ---------------------------------------------------------------------------

struct GateResult {
    size_t selected_index = 0;
    Plan selected;
    std::vector<GateReport> reports;
};

inline bool thresholds_pass(double connectivity_mean, double consistency_mean,
                            const PlannerConfig& config) {
    return connectivity_mean >= config.tau_c &&
           consistency_mean >= config.tau_s;
}

inline GateReport score_plan(const Plan& plan, const ConceptGraph& graph,
                             const PlannerConfig& config) {
    GateReport report;
    auto [per_c, c] = connectivity(plan, graph);
    auto [per_s, s] = semantic_consistency(plan, graph);
    report.per_section_connectivity = std::move(per_c);
    report.connectivity = c;
    report.per_section_consistency = std::move(per_s);
    report.consistency = s;
    report.passed = thresholds_pass(c, s, config);
    report.combined = 0.5 * c + 0.5 * s;
    report.violations = ordering_violations(plan, graph);
    return report;
}

inline GateResult gate(const std::vector<Plan>& plans,
                       const ConceptGraph& graph, const PlannerConfig& config,
                       std::vector<std::string>& warnings) {
    if (plans.empty()) throw std::invalid_argument("gate: no candidate plans");
    GateResult result;
    for (const auto& plan : plans)
        result.reports.push_back(score_plan(plan, graph, config));

    auto better = [&](size_t a, size_t b) {
        // strictly better combined score wins; ties keep the lower index
        return result.reports[a].combined > result.reports[b].combined;
    };
    std::optional<size_t> best_passing, best_clean;
    for (size_t i = 0; i < plans.size(); ++i) {
        const auto& rep = result.reports[i];
        if (!rep.violations.empty()) continue;
        if (!best_clean || better(i, *best_clean)) best_clean = i;
        if (rep.passed && (!best_passing || better(i, *best_passing)))
            best_passing = i;
    }
    if (best_passing) {
        result.selected_index = *best_passing;
        result.selected = plans[*best_passing];
    } else if (best_clean) {
        result.selected_index = *best_clean;
        result.selected = plans[*best_clean];
        warnings.push_back("gate: no plan met thresholds; fell back to best "
                           "combined score (candidate " +
                           std::to_string(*best_clean + 1) + ")");
    } else {
        warnings.push_back(
            "gate: all candidates had ordering violations; using default plan");
        result.selected = default_assignment(graph, config);
        result.selected_index = plans.size();  // sentinel: synthesized default
        result.reports.push_back(score_plan(result.selected, graph, config));
    }
    result.selected.scores = result.reports[std::min(
        result.selected_index, result.reports.size() - 1)];
    return result;
}

inline json gate_result_to_json(const GateResult& result) {
    json reports = json::array();
    for (const auto& r : result.reports) {
        reports.push_back({{"per_section_connectivity",
                            r.per_section_connectivity},
                           {"connectivity", r.connectivity},
                           {"per_section_consistency", r.per_section_consistency},
                           {"consistency", r.consistency},
                           {"passed", r.passed},
                           {"combined", r.combined},
                           {"violations", r.violations}});
    }
    return json{{"candidates", reports},
                {"selected_index", result.selected_index}};
}

}  // namespace flowplan
