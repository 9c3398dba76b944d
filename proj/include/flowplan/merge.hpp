#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "flowplan/graph.hpp"

namespace flowplan {

struct MergeConfig {
    double dedup_similarity_threshold = 0.8;
    std::vector<Category> mandatory_categories = {
        Category::Field, Category::TechProblem, Category::Solution};
    // Pluggable similarity provider; default is normalized-token Jaccard.
    std::function<double(const std::string&, const std::string&)> similarity;
    // Templates instantiated between mandatory categories by verify_mandatory.
    std::vector<std::tuple<Category, RelationType, Category>>
        mandatory_edge_templates = {
            {Category::TechProblem, RelationType::Solves, Category::Solution}};
};

inline double token_jaccard(const std::string& a, const std::string& b) {
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    std::set<std::string> sa(ta.begin(), ta.end());
    std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    size_t inter = 0;
    for (const auto& t : sa)
        if (sb.count(t)) ++inter;
    size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct NodeCluster {
    ConceptNode representative;
    // (candidate index, original node id) for every member.
    std::vector<std::pair<int, std::string>> members;
};

struct MergeReport {
    std::vector<NodeCluster> clusters;
    std::vector<std::string> dropped_edges;
    std::vector<std::string> pruned_edges;
    std::vector<std::string> pruned_nodes;
    std::vector<std::string> injected_placeholders;
    std::vector<std::string> synthetic_edges;

    json to_json() const {
        json jclusters = json::array();
        for (const auto& c : clusters) {
            json members = json::array();
            for (const auto& [cand, id] : c.members)
                members.push_back({{"candidate", cand}, {"id", id}});
            json prov = json::array();
            for (int p : c.representative.provenance.candidates)
                prov.push_back(p);
            jclusters.push_back(
                {{"id", c.representative.id},
                 {"category", std::string(to_string(c.representative.category))},
                 {"label", c.representative.label},
                 {"members", members},
                 {"provenance", prov}});
        }
        return json{{"clusters", jclusters},
                    {"dropped_edges", dropped_edges},
                    {"pruned_edges", pruned_edges},
                    {"pruned_nodes", pruned_nodes},
                    {"injected_placeholders", injected_placeholders},
                    {"synthetic_edges", synthetic_edges}};
    }
};

// ---------------------------------------------------------------------------
// Node deduplication (union semantics)
// ---------------------------------------------------------------------------

// Clusters same-category nodes whose label similarity meets the threshold,
// with transitive closure over pairwise links. The representative is the
// member from the lowest candidate index.
inline std::vector<NodeCluster> dedup_nodes(
    const std::vector<ConceptGraph>& candidates, const MergeConfig& config) {
    auto sim = config.similarity ? config.similarity : token_jaccard;

    struct Entry {
        int candidate;
        const ConceptNode* node;
    };
    std::vector<Entry> entries;
    for (size_t c = 0; c < candidates.size(); ++c)
        for (const auto& n : candidates[c].nodes)
            entries.push_back({static_cast<int>(c) + 1, &n});

    std::vector<size_t> parent(entries.size());
    std::iota(parent.begin(), parent.end(), size_t{0});
    std::function<size_t(size_t)> find = [&](size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (size_t i = 0; i < entries.size(); ++i) {
        for (size_t j = i + 1; j < entries.size(); ++j) {
            if (entries[i].node->category != entries[j].node->category) continue;
            if (sim(entries[i].node->label, entries[j].node->label) >=
                config.dedup_similarity_threshold) {
                parent[find(j)] = find(i);
            }
        }
    }

    std::map<size_t, std::vector<size_t>> groups;  // root -> member indices
    for (size_t i = 0; i < entries.size(); ++i) groups[find(i)].push_back(i);

    std::vector<NodeCluster> clusters;
    std::vector<size_t> roots;
    for (const auto& [root, members] : groups) {
        size_t first = *std::min_element(members.begin(), members.end());
        roots.push_back(first);
    }
    std::sort(roots.begin(), roots.end());  // first-occurrence order
    for (size_t root : roots) {
        const auto& members = groups[find(root)];
        size_t best = members.front();
        for (size_t m : members) {
            const auto& a = entries[m];
            const auto& b = entries[best];
            if (a.candidate != b.candidate) {
                if (a.candidate < b.candidate) best = m;
            } else if (a.node->label != b.node->label) {
                if (a.node->label < b.node->label) best = m;
            } else if (a.node->id < b.node->id) {
                best = m;
            }
        }
        NodeCluster cluster;
        cluster.representative = *entries[best].node;
        for (size_t m : members) {
            cluster.members.emplace_back(entries[m].candidate,
                                         entries[m].node->id);
            const auto& prov = entries[m].node->provenance;
            cluster.representative.provenance.candidates.insert(
                prov.candidates.begin(), prov.candidates.end());
            cluster.representative.provenance.candidates.insert(
                entries[m].candidate);
            if (prov.injected)
                cluster.representative.provenance.injected = true;
        }
        clusters.push_back(std::move(cluster));
    }
    return clusters;
}

// ---------------------------------------------------------------------------
// Edge majority voting
// ---------------------------------------------------------------------------

inline std::vector<ConceptEdge> vote_edges(
    const std::vector<ConceptGraph>& candidates,
    const std::vector<NodeCluster>& clusters, MergeReport* report = nullptr) {
    std::map<std::pair<int, std::string>, std::string> rep_of;
    for (const auto& c : clusters)
        for (const auto& member : c.members)
            rep_of[member] = c.representative.id;

    // (src rep, dst rep) -> relation -> supporting candidate set
    std::map<std::pair<std::string, std::string>,
             std::map<RelationType, std::set<int>>>
        support;
    std::vector<std::pair<std::string, std::string>> pair_order;
    for (size_t c = 0; c < candidates.size(); ++c) {
        int cand = static_cast<int>(c) + 1;
        for (const auto& e : candidates[c].edges) {
            auto s = rep_of.find({cand, e.src});
            auto d = rep_of.find({cand, e.dst});
            if (s == rep_of.end() || d == rep_of.end()) continue;
            if (s->second == d->second) {
                if (report)
                    report->dropped_edges.push_back(
                        "collapsed to self-loop after clustering: " + e.src +
                        " -> " + e.dst);
                continue;
            }
            std::pair<std::string, std::string> key{s->second, d->second};
            if (!support.count(key)) pair_order.push_back(key);
            support[key][e.relation].insert(cand);
        }
    }

    std::vector<ConceptEdge> edges;
    for (const auto& key : pair_order) {
        const auto& relations = support[key];
        RelationType winner = RelationType::Validates;
        size_t best_votes = 0;
        for (auto rel : kAllRelations) {  // precedence order breaks ties
            auto it = relations.find(rel);
            if (it == relations.end()) continue;
            if (it->second.size() > best_votes) {
                best_votes = it->second.size();
                winner = rel;
            }
        }
        if (report) {
            for (const auto& [rel, cands] : relations) {
                if (rel != winner)
                    report->dropped_edges.push_back(
                        "outvoted relation " + std::string(to_string(rel)) +
                        " on (" + key.first + ", " + key.second + ")");
            }
        }
        edges.push_back({key.first, key.second, winner,
                         static_cast<int>(best_votes), false});
    }
    return edges;
}

// ---------------------------------------------------------------------------
// Pruning: dependency cycles, then isolated nodes
// ---------------------------------------------------------------------------

namespace detail {

// Returns the edge indices of one directed cycle among dependency edges,
// or empty if acyclic.
inline std::vector<size_t> find_dependency_cycle(const ConceptGraph& graph) {
    std::map<std::string, std::vector<std::pair<std::string, size_t>>> adj;
    for (size_t i = 0; i < graph.edges.size(); ++i) {
        const auto& e = graph.edges[i];
        if (is_dependency_relation(e.relation))
            adj[e.src].emplace_back(e.dst, i);
    }
    std::map<std::string, int> color;  // 0 white, 1 grey, 2 black
    std::vector<std::pair<std::string, size_t>> path;  // (node, edge into it)

    std::function<std::vector<size_t>(const std::string&)> dfs =
        [&](const std::string& u) -> std::vector<size_t> {
        color[u] = 1;
        for (const auto& [v, edge_idx] : adj[u]) {
            if (color[v] == 1) {
                std::vector<size_t> cycle{edge_idx};
                for (auto it = path.rbegin(); it != path.rend(); ++it) {
                    if (it->first == v) break;
                    cycle.push_back(it->second);
                }
                std::reverse(cycle.begin(), cycle.end());
                return cycle;
            }
            if (color[v] == 0) {
                path.emplace_back(v, edge_idx);
                auto found = dfs(v);
                path.pop_back();
                if (!found.empty()) return found;
            }
        }
        color[u] = 2;
        return {};
    };

    std::vector<std::string> order;
    for (const auto& n : graph.nodes) order.push_back(n.id);
    std::sort(order.begin(), order.end());
    for (const auto& id : order) {
        if (color[id] == 0) {
            path.clear();
            auto cycle = dfs(id);
            if (!cycle.empty()) return cycle;
        }
    }
    return {};
}

inline bool has_dependency_path(const ConceptGraph& graph,
                                const std::string& from,
                                const std::string& to) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : graph.edges)
        if (is_dependency_relation(e.relation)) adj[e.src].push_back(e.dst);
    std::set<std::string> seen{from};
    std::vector<std::string> stack{from};
    while (!stack.empty()) {
        std::string u = stack.back();
        stack.pop_back();
        if (u == to) return true;
        for (const auto& v : adj[u])
            if (seen.insert(v).second) stack.push_back(v);
    }
    return false;
}

}  // namespace detail

inline ConceptGraph prune(ConceptGraph graph, const MergeConfig& config,
                          MergeReport* report = nullptr) {
    // Break dependency cycles: remove the member edge with fewest votes,
    // ties by lowest relation precedence, then lexicographic (src, dst).
    while (true) {
        auto cycle = detail::find_dependency_cycle(graph);
        if (cycle.empty()) break;
        size_t victim = cycle.front();
        for (size_t idx : cycle) {
            const auto& a = graph.edges[idx];
            const auto& b = graph.edges[victim];
            if (a.votes != b.votes) {
                if (a.votes < b.votes) victim = idx;
            } else if (a.relation != b.relation) {
                if (relation_precedence(a.relation) >
                    relation_precedence(b.relation))
                    victim = idx;
            } else if (std::tie(a.src, a.dst) < std::tie(b.src, b.dst)) {
                victim = idx;
            }
        }
        if (report) {
            const auto& e = graph.edges[victim];
            report->pruned_edges.push_back(
                "cycle break: " + e.src + " -" +
                std::string(to_string(e.relation)) + "-> " + e.dst +
                " (votes=" + std::to_string(e.votes) + ")");
        }
        graph.edges.erase(graph.edges.begin() +
                          static_cast<ptrdiff_t>(victim));
    }

    // Drop isolated nodes unless mandatory.
    std::set<std::string> touched;
    for (const auto& e : graph.edges) {
        touched.insert(e.src);
        touched.insert(e.dst);
    }
    std::set<Category> mandatory(config.mandatory_categories.begin(),
                                 config.mandatory_categories.end());
    std::vector<ConceptNode> kept;
    for (auto& n : graph.nodes) {
        if (!touched.count(n.id) && !mandatory.count(n.category)) {
            if (report)
                report->pruned_nodes.push_back("isolated: " + n.id + " (" +
                                               n.label + ")");
            continue;
        }
        kept.push_back(std::move(n));
    }
    graph.nodes = std::move(kept);
    return graph;
}

// ---------------------------------------------------------------------------
// Mandatory-node verification
// ---------------------------------------------------------------------------

inline ConceptGraph verify_mandatory(ConceptGraph graph,
                                     const MergeConfig& config,
                                     MergeReport* report = nullptr) {
    for (Category cat : config.mandatory_categories) {
        bool present = false;
        for (const auto& n : graph.nodes)
            if (n.category == cat) {
                present = true;
                break;
            }
        if (present) continue;
        ConceptNode node;
        node.category = cat;
        node.label = "unspecified-" + std::string(to_string(cat));
        node.placeholder = true;
        node.provenance = Provenance::make_injected();
        node.id = make_node_id(cat, node.label);
        if (report) report->injected_placeholders.push_back(node.id);
        graph.nodes.push_back(std::move(node));
    }

    for (const auto& [src_cat, relation, dst_cat] :
         config.mandatory_edge_templates) {
        // First node of each category, by id, for determinism.
        const ConceptNode* src = nullptr;
        const ConceptNode* dst = nullptr;
        bool relation_present = false;
        for (const auto& n : graph.nodes) {
            if (n.category == src_cat && (!src || n.id < src->id)) src = &n;
            if (n.category == dst_cat && (!dst || n.id < dst->id)) dst = &n;
        }
        if (!src || !dst) continue;
        for (const auto& e : graph.edges) {
            const auto* s = graph.find_node(e.src);
            const auto* d = graph.find_node(e.dst);
            if (s && d && s->category == src_cat && d->category == dst_cat &&
                e.relation == relation) {
                relation_present = true;
                break;
            }
        }
        if (relation_present) continue;
        if (graph.has_edge(src->id, dst->id)) continue;
        // Never reintroduce a dependency cycle.
        if (is_dependency_relation(relation) &&
            detail::has_dependency_path(graph, dst->id, src->id))
            continue;
        ConceptEdge edge{src->id, dst->id, relation, 0, true};
        if (report)
            report->synthetic_edges.push_back(
                edge.src + " -" + std::string(to_string(relation)) + "-> " +
                edge.dst);
        graph.edges.push_back(std::move(edge));
    }
    return graph;
}

// ---------------------------------------------------------------------------
// Full merge
// ---------------------------------------------------------------------------

inline ConceptGraph merge_graphs(const std::vector<ConceptGraph>& candidates,
                                 const MergeConfig& config = {},
                                 MergeReport* report = nullptr) {
    if (candidates.size() != 3)
        throw std::invalid_argument("merge expects exactly 3 candidates, got " +
                                    std::to_string(candidates.size()));
    MergeReport local;
    MergeReport* rep = report ? report : &local;
    auto clusters = dedup_nodes(candidates, config);
    ConceptGraph merged;
    for (const auto& c : clusters) merged.nodes.push_back(c.representative);
    merged.edges = vote_edges(candidates, clusters, rep);
    rep->clusters = clusters;
    merged = prune(std::move(merged), config, rep);
    merged = verify_mandatory(std::move(merged), config, rep);
    return merged;
}

}  // namespace flowplan
