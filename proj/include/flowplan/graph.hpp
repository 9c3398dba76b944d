#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace flowplan {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Drafting categories
// ---------------------------------------------------------------------------

enum class Category {
    Field,
    TechProblem,
    PriorArt,
    Novelty,
    Solution,
    Implementation,
    Effects,
    Embodiment,
    Figure,
};

inline constexpr std::array<Category, 9> kAllCategories = {
    Category::Field,       Category::TechProblem, Category::PriorArt,
    Category::Novelty,     Category::Solution,    Category::Implementation,
    Category::Effects,     Category::Embodiment,  Category::Figure,
};

inline constexpr std::array<std::string_view, 9> kCategoryNames = {
    "Field",   "TechProblem",    "PriorArt", "Novelty",    "Solution",
    "Implementation", "Effects", "Embodiment", "Figure",
};

inline std::string_view to_string(Category c) {
    return kCategoryNames[static_cast<size_t>(c)];
}

inline int category_index(Category c) { return static_cast<int>(c); }

inline std::optional<Category> parse_category(std::string_view s) {
    for (size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (s == kCategoryNames[i]) return kAllCategories[i];
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Relation types
// ---------------------------------------------------------------------------

enum class RelationType {
    // Listed in descending precedence; lower index = higher precedence.
    Solves,
    Implements,
    Causes,
    Improves,
    Validates,
};

inline constexpr std::array<RelationType, 5> kAllRelations = {
    RelationType::Solves,   RelationType::Implements, RelationType::Causes,
    RelationType::Improves, RelationType::Validates,
};

inline constexpr std::array<std::string_view, 5> kRelationNames = {
    "solves", "implements", "causes", "improves", "validates",
};

inline std::string_view to_string(RelationType r) {
    return kRelationNames[static_cast<size_t>(r)];
}

// 0 is highest precedence (solves), 4 lowest (validates).
inline int relation_precedence(RelationType r) { return static_cast<int>(r); }

inline std::optional<RelationType> parse_relation(std::string_view s) {
    for (size_t i = 0; i < kRelationNames.size(); ++i) {
        if (s == kRelationNames[i]) return kAllRelations[i];
    }
    return std::nullopt;
}

// Dependency relations participate in cycle pruning; validates is exempt.
inline bool is_dependency_relation(RelationType r) {
    return r != RelationType::Validates;
}

// ---------------------------------------------------------------------------
// Text normalization helpers
// ---------------------------------------------------------------------------

inline std::string normalize_label(std::string_view label) {
    std::string out;
    out.reserve(label.size());
    bool pending_space = false;
    for (unsigned char ch : label) {
        if (std::isalnum(ch)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(ch)));
        } else if (ch >= 0x80) {
            // keep non-ASCII bytes as-is
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(ch));
        } else {
            pending_space = true;
        }
    }
    return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::istringstream in{normalize_label(text)};
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

// FNV-1a, 64-bit. Stable across platforms.
inline uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Content-derived node id: stable hash of category + normalized label.
inline std::string make_node_id(Category category, std::string_view label) {
    std::string key{to_string(category)};
    key += '|';
    key += normalize_label(label);
    return "n" + hex64(fnv1a64(key));
}

// ---------------------------------------------------------------------------
// Graph model
// ---------------------------------------------------------------------------

struct Provenance {
    std::set<int> candidates;  // candidate indices 1..3
    bool injected = false;

    static Provenance from_candidate(int idx) {
        Provenance p;
        p.candidates.insert(idx);
        return p;
    }
    static Provenance make_injected() {
        Provenance p;
        p.injected = true;
        return p;
    }
};

struct ConceptNode {
    std::string id;
    Category category = Category::Solution;
    std::string label;
    std::string detail;
    bool placeholder = false;
    Provenance provenance;
};

struct ConceptEdge {
    std::string src;
    std::string dst;
    RelationType relation = RelationType::Solves;
    int votes = 1;
    bool synthetic = false;
};

class ConceptGraph {
public:
    std::vector<ConceptNode> nodes;
    std::vector<ConceptEdge> edges;

    const ConceptNode* find_node(std::string_view id) const {
        for (const auto& n : nodes)
            if (n.id == id) return &n;
        return nullptr;
    }

    bool has_edge(std::string_view src, std::string_view dst) const {
        for (const auto& e : edges)
            if (e.src == src && e.dst == dst) return true;
        return false;
    }

    bool empty() const { return nodes.empty() && edges.empty(); }

    // Canonical ordering used by serialization and linearization.
    std::vector<const ConceptNode*> sorted_nodes() const {
        std::vector<const ConceptNode*> out;
        out.reserve(nodes.size());
        for (const auto& n : nodes) out.push_back(&n);
        std::sort(out.begin(), out.end(),
                  [](const ConceptNode* a, const ConceptNode* b) {
                      if (a->category != b->category)
                          return category_index(a->category) <
                                 category_index(b->category);
                      if (a->label != b->label) return a->label < b->label;
                      return a->id < b->id;
                  });
        return out;
    }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline std::vector<std::string> validate_graph(const ConceptGraph& graph) {
    std::vector<std::string> violations;
    std::set<std::string> ids;
    for (const auto& n : graph.nodes) {
        if (!ids.insert(n.id).second)
            violations.push_back("duplicate node id " + n.id);
        if (n.label.empty() && !n.placeholder)
            violations.push_back("empty label at non-placeholder node " + n.id);
    }
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& e : graph.edges) {
        if (e.src == e.dst) violations.push_back("self-loop at " + e.src);
        if (!ids.count(e.src))
            violations.push_back("edge src " + e.src + " unresolved");
        if (!ids.count(e.dst))
            violations.push_back("edge dst " + e.dst + " unresolved");
        if (!pairs.insert({e.src, e.dst}).second)
            violations.push_back("duplicate edge pair (" + e.src + ", " +
                                 e.dst + ")");
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Induced subgraph
// ---------------------------------------------------------------------------

inline ConceptGraph induced_subgraph(const ConceptGraph& graph,
                                     const std::set<std::string>& node_ids) {
    for (const auto& id : node_ids) {
        if (!graph.find_node(id))
            throw std::invalid_argument("unknown node id: " + id);
    }
    ConceptGraph out;
    for (const auto& n : graph.nodes)
        if (node_ids.count(n.id)) out.nodes.push_back(n);
    for (const auto& e : graph.edges)
        if (node_ids.count(e.src) && node_ids.count(e.dst))
            out.edges.push_back(e);
    return out;
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

// Deterministic text form fed to generation prompts. Nodes in category order
// then label order; edges by (src label, dst label, relation precedence).
// Node ids never appear, so the text is invariant under id renaming.
inline std::string linearize(const ConceptGraph& subgraph) {
    std::string out;
    auto ordered = subgraph.sorted_nodes();
    for (const auto* n : ordered) {
        out += "[";
        out += to_string(n->category);
        out += "] ";
        out += n->label;
        if (!n->detail.empty()) {
            out += ": ";
            out += n->detail;
        }
        out += "\n";
    }
    struct EdgeLine {
        std::string src_label, dst_label;
        RelationType relation;
    };
    std::vector<EdgeLine> lines;
    for (const auto& e : subgraph.edges) {
        const auto* s = subgraph.find_node(e.src);
        const auto* d = subgraph.find_node(e.dst);
        if (!s || !d) continue;
        lines.push_back({s->label, d->label, e.relation});
    }
    std::sort(lines.begin(), lines.end(), [](const EdgeLine& a, const EdgeLine& b) {
        if (a.src_label != b.src_label) return a.src_label < b.src_label;
        if (a.dst_label != b.dst_label) return a.dst_label < b.dst_label;
        return relation_precedence(a.relation) < relation_precedence(b.relation);
    });
    for (const auto& l : lines) {
        out += l.src_label;
        out += " —";
        out += to_string(l.relation);
        out += "→ ";
        out += l.dst_label;
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

inline json graph_to_json(const ConceptGraph& graph) {
    json nodes = json::array();
    for (const auto* n : graph.sorted_nodes()) {
        nodes.push_back({{"id", n->id},
                         {"category", std::string(to_string(n->category))},
                         {"label", n->label},
                         {"detail", n->detail},
                         {"placeholder", n->placeholder}});
    }
    std::vector<const ConceptEdge*> sorted;
    for (const auto& e : graph.edges) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(),
              [](const ConceptEdge* a, const ConceptEdge* b) {
                  if (a->src != b->src) return a->src < b->src;
                  return a->dst < b->dst;
              });
    json edges = json::array();
    for (const auto* e : sorted) {
        edges.push_back(json::array(
            {e->src, e->dst, std::string(to_string(e->relation))}));
    }
    return json{{"nodes", nodes}, {"edges", edges}};
}

inline ConceptGraph graph_from_json(const json& j) {
    ConceptGraph g;
    if (!j.contains("nodes") || !j.contains("edges"))
        throw std::invalid_argument("graph JSON missing nodes/edges");
    for (const auto& jn : j.at("nodes")) {
        ConceptNode n;
        std::string cat = jn.at("category").get<std::string>();
        auto parsed = parse_category(cat);
        if (!parsed) throw std::invalid_argument("unknown category: " + cat);
        n.category = *parsed;
        n.label = jn.at("label").get<std::string>();
        n.detail = jn.value("detail", std::string{});
        n.placeholder = jn.value("placeholder", false);
        n.id = jn.contains("id") ? jn.at("id").get<std::string>()
                                 : make_node_id(n.category, n.label);
        if (n.placeholder && n.provenance.candidates.empty())
            n.provenance.injected = true;
        g.nodes.push_back(std::move(n));
    }
    for (const auto& je : j.at("edges")) {
        ConceptEdge e;
        e.src = je.at(0).get<std::string>();
        e.dst = je.at(1).get<std::string>();
        std::string rel = je.at(2).get<std::string>();
        auto parsed = parse_relation(rel);
        if (!parsed) throw std::invalid_argument("unknown relation: " + rel);
        e.relation = *parsed;
        g.edges.push_back(std::move(e));
    }
    return g;
}

inline bool graphs_equal(const ConceptGraph& a, const ConceptGraph& b) {
    return graph_to_json(a) == graph_to_json(b);
}

// Finds the first balanced {...} block in free-form text that parses as JSON
// and contains all required keys. Returns nullopt if none exists.
inline std::optional<json> extract_json_object(
    const std::string& text, const std::vector<std::string>& required_keys) {
    auto extract_balanced = [&text](size_t start) -> std::optional<std::string> {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
            } else if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) return text.substr(start, i - start + 1);
            }
        }
        return std::nullopt;
    };
    for (size_t pos = text.find('{'); pos != std::string::npos;
         pos = text.find('{', pos + 1)) {
        auto block = extract_balanced(pos);
        if (!block) continue;
        json j = json::parse(*block, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        bool ok = true;
        for (const auto& key : required_keys)
            if (!j.contains(key)) {
                ok = false;
                break;
            }
        if (ok) return j;
    }
    return std::nullopt;
}

}  // namespace flowplan
