#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowplan/graph.hpp"

namespace flowplan {

// The five canonical patent-description sections, in display order.
enum class SectionId {
    Field,
    Background,
    Summary,
    DetailedDescription,
    Effects,
};

inline constexpr std::array<SectionId, 5> kAllSections = {
    SectionId::Field, SectionId::Background, SectionId::Summary,
    SectionId::DetailedDescription, SectionId::Effects,
};

inline constexpr std::array<std::string_view, 5> kSectionNames = {
    "Field", "Background", "Summary", "DetailedDescription", "Effects",
};

inline std::string_view to_string(SectionId s) {
    return kSectionNames[static_cast<size_t>(s)];
}

inline std::optional<SectionId> parse_section(std::string_view s) {
    for (size_t i = 0; i < kSectionNames.size(); ++i) {
        if (s == kSectionNames[i]) return kAllSections[i];
    }
    return std::nullopt;
}

struct SectionAssignment {
    SectionId section = SectionId::Field;
    std::vector<std::string> node_ids;
};

struct GateReport {
    std::vector<double> per_section_connectivity;
    double connectivity = 0.0;
    std::vector<double> per_section_consistency;
    double consistency = 0.0;
    bool passed = false;
    double combined = 0.0;
    std::vector<std::string> violations;
};

struct Plan {
    std::vector<SectionAssignment> assignments;
    std::vector<size_t> order;  // permutation over assignment indices
    GateReport scores;

    const SectionAssignment& ordered(size_t i) const {
        return assignments[order[i]];
    }
};

// Checks that the plan's node ids partition the graph's node set exactly.
inline bool plan_partitions_graph(const Plan& plan, const ConceptGraph& graph) {
    std::set<std::string> seen;
    for (const auto& a : plan.assignments) {
        for (const auto& id : a.node_ids) {
            if (!graph.find_node(id)) return false;
            if (!seen.insert(id).second) return false;
        }
    }
    if (seen.size() != graph.nodes.size()) return false;
    std::set<size_t> perm(plan.order.begin(), plan.order.end());
    if (plan.order.size() != plan.assignments.size()) return false;
    if (perm.size() != plan.assignments.size()) return false;
    for (size_t i : perm)
        if (i >= plan.assignments.size()) return false;
    return true;
}

inline json plan_to_json(const Plan& plan) {
    json sections = json::array();
    for (const auto& a : plan.assignments) {
        sections.push_back({{"section", std::string(to_string(a.section))},
                            {"node_ids", a.node_ids}});
    }
    return json{{"sections", sections}, {"order", plan.order}};
}

inline Plan plan_from_json(const json& j) {
    Plan plan;
    for (const auto& js : j.at("sections")) {
        SectionAssignment a;
        std::string name = js.at("section").get<std::string>();
        auto parsed = parse_section(name);
        if (!parsed) throw std::invalid_argument("unknown section: " + name);
        a.section = *parsed;
        a.node_ids = js.at("node_ids").get<std::vector<std::string>>();
        plan.assignments.push_back(std::move(a));
    }
    if (j.contains("order")) {
        plan.order = j.at("order").get<std::vector<size_t>>();
    } else {
        for (size_t i = 0; i < plan.assignments.size(); ++i)
            plan.order.push_back(i);
    }
    return plan;
}

}  // namespace flowplan
