#pragma once

#include <map>
#include <string>
#include <vector>

#include "flowplan/gateway.hpp"
#include "flowplan/graph.hpp"

namespace flowplan {

struct Document {
    std::string raw_text;
    std::vector<std::pair<std::string, std::string>> sections;

    static Document from_text(std::string text) {
        if (text.empty())
            throw std::invalid_argument("document text is empty");
        Document doc;
        doc.raw_text = std::move(text);
        // Markdown-style headings populate sections (informational only).
        std::istringstream in(doc.raw_text);
        std::string line, heading, body;
        auto flush = [&] {
            if (!heading.empty()) doc.sections.emplace_back(heading, body);
            body.clear();
        };
        while (std::getline(in, line)) {
            if (line.starts_with('#')) {
                flush();
                heading = line.substr(line.find_first_not_of("# "));
            } else if (!heading.empty()) {
                body += line;
                body += '\n';
            }
        }
        flush();
        return doc;
    }
};

struct ReasoningStep {
    Category category = Category::Field;
    int position = 1;  // 1..9, matching the category listing order
    std::string text;
    std::string context_hash;
};

struct InductionConfig {
    size_t doc_char_budget = 48000;  // head-weighted truncation beyond this
    std::vector<std::tuple<Category, RelationType, Category>> edge_templates = {
        {Category::TechProblem, RelationType::Solves, Category::Solution},
        {Category::Solution, RelationType::Implements, Category::Implementation},
        {Category::Implementation, RelationType::Causes, Category::Effects},
        {Category::Novelty, RelationType::Improves, Category::PriorArt},
        {Category::Effects, RelationType::Validates, Category::TechProblem},
        {Category::Embodiment, RelationType::Implements, Category::Solution},
        {Category::Figure, RelationType::Implements, Category::Implementation},
        {Category::PriorArt, RelationType::Causes, Category::TechProblem},
    };
};

inline std::string_view category_primer(Category c) {
    switch (c) {
        case Category::Field:
            return "The present invention relates to";
        case Category::TechProblem:
            return "However, conventional technology has the following drawbacks";
        case Category::PriorArt:
            return "According to the prior art";
        case Category::Novelty:
            return "The novel aspect of the present invention is";
        case Category::Solution:
            return "To solve the above problems, the present invention provides";
        case Category::Implementation:
            return "The invention is implemented by";
        case Category::Effects:
            return "Therefore, according to the present invention, the effect is";
        case Category::Embodiment:
            return "According to one embodiment of the present invention";
        case Category::Figure:
            return "Figure 1 illustrates";
    }
    return "";
}

inline std::string truncate_head_weighted(const std::string& text,
                                          size_t budget, bool* truncated) {
    if (truncated) *truncated = false;
    if (text.size() <= budget) return text;
    if (truncated) *truncated = true;
    size_t head = budget * 5 / 6;
    size_t tail = budget - head;
    return text.substr(0, head) + "\n...[truncated]...\n" +
           text.substr(text.size() - tail);
}

inline std::string first_sentence(const std::string& text, size_t max_len) {
    size_t end = text.size();
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            end = i;
            break;
        }
        if (c == '\n') {
            end = i;
            break;
        }
    }
    std::string s = text.substr(0, end);
    if (s.size() > max_len) s.resize(max_len);
    return s;
}

inline bool is_blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

// ---------------------------------------------------------------------------
// Sequential expert-reasoning chain
// ---------------------------------------------------------------------------

inline PromptRequest reasoning_prompt(const Document& doc,
                                      const std::vector<ReasoningStep>& prior,
                                      Category category,
                                      const InductionConfig& config) {
    PromptRequest req;
    req.tag = "induction";
    std::string system = "You are an expert patent drafter. Write the ";
    system += to_string(category);
    system += " reasoning step for a patent description derived from the "
              "document below. Use standard patent phrasing and open with: \"";
    system += category_primer(category);
    system += " ...\".";
    if (category == Category::TechProblem) {
        system += " Explicitly contrast the proposed method with prior art "
                  "limitations.";
    }
    req.system_text = std::move(system);

    bool truncated = false;
    std::string body = "[Document]\n";
    body += truncate_head_weighted(doc.raw_text, config.doc_char_budget,
                                   &truncated);
    body += "\n";
    for (const auto& step : prior) {
        body += "\n[";
        body += to_string(step.category);
        body += "]\n";
        body += step.text;
        body += "\n";
    }
    req.user_text = std::move(body);
    return req;
}

inline std::vector<ReasoningStep> run_reasoning_chain(
    const Document& doc, Gateway& gateway, const InductionConfig& config,
    std::vector<std::string>& warnings) {
    if (doc.raw_text.empty())
        throw std::invalid_argument("document text is empty");
    std::vector<ReasoningStep> steps;
    for (size_t i = 0; i < kAllCategories.size(); ++i) {
        Category category = kAllCategories[i];
        PromptRequest req = reasoning_prompt(doc, steps, category, config);
        Completion completion = gateway.complete(req);
        std::string text = completion.text;
        if (is_blank(text)) {
            PromptRequest retry = req;
            retry.user_text +=
                "\nYour previous reply was empty. You must produce a "
                "non-empty reasoning step for this category.";
            text = gateway.complete(retry).text;
        }
        if (is_blank(text)) {
            warnings.push_back("induction: empty reply for category " +
                               std::string(to_string(category)) +
                               "; recorded as unspecified");
            text = "unspecified";
        }
        ReasoningStep step;
        step.category = category;
        step.position = static_cast<int>(i) + 1;
        step.text = std::move(text);
        step.context_hash = canonical_hash(req);
        steps.push_back(std::move(step));
    }
    return steps;
}

// ---------------------------------------------------------------------------
// Candidate graph 1: rule-based construction from edge templates
// ---------------------------------------------------------------------------

inline ConceptGraph build_rule_based_graph(
    const std::vector<ReasoningStep>& steps,
    const InductionConfig& config = {}) {
    if (steps.size() != kAllCategories.size())
        throw std::invalid_argument("expected 9 reasoning steps, got " +
                                    std::to_string(steps.size()));
    ConceptGraph graph;
    std::map<Category, std::string> node_of;
    for (const auto& step : steps) {
        if (step.text == "unspecified") continue;
        ConceptNode node;
        node.category = step.category;
        node.label = first_sentence(step.text, 120);
        node.detail = step.text;
        node.id = make_node_id(node.category, node.label);
        node.provenance = Provenance::from_candidate(1);
        node_of[step.category] = node.id;
        graph.nodes.push_back(std::move(node));
    }
    for (const auto& [src_cat, relation, dst_cat] : config.edge_templates) {
        auto s = node_of.find(src_cat);
        auto d = node_of.find(dst_cat);
        if (s == node_of.end() || d == node_of.end()) continue;
        graph.edges.push_back({s->second, d->second, relation, 1, false});
    }
    return graph;
}

// ---------------------------------------------------------------------------
// Tolerant JSON graph parsing
// ---------------------------------------------------------------------------

struct GraphParseError : std::runtime_error {
    size_t byte_offset;
    explicit GraphParseError(size_t offset)
        : std::runtime_error("no graph JSON object found (searched " +
                             std::to_string(offset) + " bytes)"),
          byte_offset(offset) {}
};

inline std::optional<Category> resolve_category_alias(std::string_view name) {
    if (auto exact = parse_category(name)) return exact;
    static const std::map<std::string, Category, std::less<>> aliases = {
        {"problem", Category::TechProblem},
        {"techproblem", Category::TechProblem},
        {"tech problem", Category::TechProblem},
        {"effect", Category::Effects},
        {"effects", Category::Effects},
        {"prior art", Category::PriorArt},
        {"priorart", Category::PriorArt},
        {"field", Category::Field},
        {"novelty", Category::Novelty},
        {"solution", Category::Solution},
        {"implementation", Category::Implementation},
        {"embodiment", Category::Embodiment},
        {"figure", Category::Figure},
    };
    auto it = aliases.find(normalize_label(name));
    if (it != aliases.end()) return it->second;
    return std::nullopt;
}

// Extracts the first balanced {...} block containing "nodes" and "edges"
// from surrounding prose. Node entries may be bare labels or full objects;
// malformed pieces are dropped with warnings, never a hard failure.
inline ConceptGraph parse_graph_json(const std::string& text,
                                     std::vector<std::string>& warnings,
                                     int candidate_index = 0) {
    auto extracted = extract_json_object(text, {"nodes", "edges"});
    if (!extracted) throw GraphParseError(text.size());
    json parsed = std::move(*extracted);

    ConceptGraph graph;
    std::map<std::string, std::string> by_label;  // raw label -> node id
    auto add_node = [&](ConceptNode node, const std::string& raw_label) {
        if (graph.find_node(node.id)) return;  // dedup by content id
        by_label.emplace(raw_label, node.id);
        graph.nodes.push_back(std::move(node));
    };

    for (const auto& jn : parsed["nodes"]) {
        ConceptNode node;
        std::string raw_label;
        if (jn.is_string()) {
            raw_label = jn.get<std::string>();
            auto cat = resolve_category_alias(raw_label);
            if (!cat) {
                warnings.push_back("parse: unknown category for label \"" +
                                   raw_label + "\"; defaulting to Solution");
                cat = Category::Solution;
            }
            node.category = *cat;
            node.label = raw_label;
        } else if (jn.is_object() && jn.contains("label")) {
            raw_label = jn["label"].get<std::string>();
            node.label = raw_label;
            node.detail = jn.value("detail", std::string{});
            std::string cat_name = jn.value("category", std::string{});
            auto cat = resolve_category_alias(cat_name);
            if (!cat) {
                warnings.push_back("parse: unknown category \"" + cat_name +
                                   "\" for node \"" + raw_label +
                                   "\"; defaulting to Solution");
                cat = Category::Solution;
            }
            node.category = *cat;
        } else {
            warnings.push_back("parse: dropped malformed node entry");
            continue;
        }
        node.id = make_node_id(node.category, node.label);
        if (candidate_index > 0)
            node.provenance = Provenance::from_candidate(candidate_index);
        add_node(std::move(node), raw_label);
    }

    for (const auto& je : parsed["edges"]) {
        if (!je.is_array() || je.size() < 3 || !je[0].is_string() ||
            !je[1].is_string() || !je[2].is_string()) {
            warnings.push_back("parse: dropped malformed edge entry");
            continue;
        }
        auto resolve = [&](const std::string& ref) -> std::optional<std::string> {
            if (graph.find_node(ref)) return ref;
            auto it = by_label.find(ref);
            if (it != by_label.end()) return it->second;
            return std::nullopt;
        };
        std::string src_ref = je[0].get<std::string>();
        std::string dst_ref = je[1].get<std::string>();
        std::string rel_name = je[2].get<std::string>();
        auto src = resolve(src_ref);
        auto dst = resolve(dst_ref);
        auto rel = parse_relation(rel_name);
        if (!rel) {
            warnings.push_back("parse: dropped edge with unknown relation \"" +
                               rel_name + "\"");
            continue;
        }
        if (!src || !dst) {
            warnings.push_back("parse: dropped dangling edge " + src_ref +
                               " -> " + dst_ref);
            continue;
        }
        if (*src == *dst) {
            warnings.push_back("parse: dropped self-loop at " + src_ref);
            continue;
        }
        if (graph.has_edge(*src, *dst)) {
            warnings.push_back("parse: dropped duplicate edge " + src_ref +
                               " -> " + dst_ref);
            continue;
        }
        graph.edges.push_back({*src, *dst, *rel, 1, false});
    }
    return graph;
}

// ---------------------------------------------------------------------------
// Candidate graphs 2 and 3: LLM-based relation inference
// ---------------------------------------------------------------------------

inline PromptRequest graph_prompt(const std::vector<ReasoningStep>& steps,
                                  int variant) {
    PromptRequest req;
    req.tag = "graph";
    std::string system =
        "You infer a directed concept graph of patent elements from the "
        "reasoning steps below. Allowed node categories: Field, TechProblem, "
        "PriorArt, Novelty, Solution, Implementation, Effects, Embodiment, "
        "Figure. Allowed edge relations: solves, implements, causes, "
        "improves, validates. Return JSON with two fields:\n"
        "{\n  \"nodes\": [...],\n  \"edges\": [[\"src\",\"dst\",\"relation\"], ...]\n}";
    if (variant == 3) {
        system +=
            "\nGo beyond the obvious template links: also propose "
            "cross-category dependencies that the standard templates miss.";
    }
    req.system_text = std::move(system);
    std::string body;
    for (const auto& step : steps) {
        body += "[";
        body += to_string(step.category);
        body += "]\n";
        body += step.text;
        body += "\n\n";
    }
    req.user_text = std::move(body);
    return req;
}

inline ConceptGraph build_llm_graph(const std::vector<ReasoningStep>& steps,
                                    Gateway& gateway, int variant,
                                    std::vector<std::string>& warnings) {
    PromptRequest req = graph_prompt(steps, variant);
    std::string reply = gateway.complete(req).text;
    try {
        return parse_graph_json(reply, warnings, variant);
    } catch (const GraphParseError& ex) {
        PromptRequest repair = req;
        repair.user_text += "\nYour previous reply could not be parsed (";
        repair.user_text += ex.what();
        repair.user_text += "). Reply with the JSON object only.";
        std::string second = gateway.complete(repair).text;
        try {
            return parse_graph_json(second, warnings, variant);
        } catch (const GraphParseError&) {
            warnings.push_back("graph candidate " + std::to_string(variant) +
                               ": unparseable reply twice; using empty graph");
            return {};
        }
    }
}

}  // namespace flowplan
