#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "flowplan/config.hpp"
#include "flowplan/gateway.hpp"
#include "flowplan/generator.hpp"
#include "flowplan/graph.hpp"
#include "flowplan/induction.hpp"
#include "flowplan/merge.hpp"
#include "flowplan/plan.hpp"
#include "flowplan/planner.hpp"

namespace flowplan {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    std::vector<std::string> violations;
    explicit ValidationError(const std::string& msg,
                             std::vector<std::string> v = {})
        : std::runtime_error(msg), violations(std::move(v)) {}
};

struct RunManifest {
    json config_snapshot;
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
    std::map<std::string, double> timing_ms;
    std::map<std::string, size_t> gateway_calls;
    std::string error;

    json to_json(bool include_timing = true) const {
        json j{{"config", config_snapshot},
               {"artifacts", artifacts},
               {"warnings", warnings},
               {"gateway_calls", gateway_calls},
               {"error", error}};
        if (include_timing) {
            json t = json::object();
            for (const auto& [stage, ms] : timing_ms) t[stage] = ms;
            j["timing_ms"] = t;
        }
        return j;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path);
        out << to_json().dump(2) << "\n";
    }
};

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_artifact(RunManifest& manifest,
                           const std::filesystem::path& path,
                           const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty()
                                            ? "."
                                            : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << content;
    manifest.artifacts.push_back(path.string());
}

inline ConceptGraph load_graph_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& ex) {
        throw ValidationError("invalid graph JSON in " + path.string() + ": " +
                              ex.what());
    }
    try {
        return graph_from_json(j);
    } catch (const std::exception& ex) {
        throw ValidationError("invalid graph in " + path.string() + ": " +
                              ex.what());
    }
}

inline Plan load_plan_file(const std::filesystem::path& path) {
    try {
        return plan_from_json(json::parse(read_text_file(path)));
    } catch (const json::exception& ex) {
        throw ValidationError("invalid plan JSON in " + path.string() + ": " +
                              ex.what());
    }
}

// ---------------------------------------------------------------------------
// Model-backed merge (prompt route; algorithmic merge is the default)
// ---------------------------------------------------------------------------

inline ConceptGraph merge_graphs_via_model(
    const std::vector<ConceptGraph>& candidates, const MergeConfig& config,
    Gateway& gateway, std::vector<std::string>& warnings,
    MergeReport* report = nullptr) {
    if (candidates.size() != 3)
        throw std::invalid_argument("merge expects exactly 3 candidates");
    PromptRequest req;
    req.tag = "merge";
    req.system_text =
        "You are given three candidate graphs generated from the same "
        "document. Each graph is represented in JSON with two fields: "
        "\"nodes\" and \"edges\". Your task is to merge these graphs into a "
        "single, consistent graph.\n"
        "- Do not invent any new nodes or edges not present in the inputs.\n"
        "- Preserve all node labels exactly as given.\n"
        "- If an edge type conflicts, prefer the one that appears more than "
        "once.\n"
        "- Include all unique nodes.\n"
        "Return the merged graph in JSON:\n{\n  \"nodes\": [...],\n  "
        "\"edges\": [...]\n}";
    for (size_t i = 0; i < candidates.size(); ++i) {
        req.user_text += "Graph " + std::to_string(i + 1) + ":\n" +
                         graph_to_json(candidates[i]).dump(2) + "\n";
    }
    std::string reply = gateway.complete(req).text;
    ConceptGraph merged;
    try {
        merged = parse_graph_json(reply, warnings);
    } catch (const GraphParseError&) {
        warnings.push_back(
            "merge: model reply unparseable; falling back to algorithmic merge");
        return merge_graphs(candidates, config, report);
    }
    MergeReport local;
    MergeReport* rep = report ? report : &local;
    merged = prune(std::move(merged), config, rep);
    merged = verify_mandatory(std::move(merged), config, rep);
    return merged;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

struct InduceOutput {
    std::vector<ReasoningStep> steps;
    std::vector<ConceptGraph> candidates;
};

inline InduceOutput stage_induce(const PipelineConfig& config,
                                 Gateway& gateway, RunManifest& manifest) {
    std::string text = read_text_file(config.input);
    if (text.empty())
        throw ValidationError("input document is empty: " +
                              config.input.string());
    Document doc = Document::from_text(std::move(text));

    InduceOutput out;
    out.steps =
        run_reasoning_chain(doc, gateway, config.induction, manifest.warnings);
    out.candidates.push_back(
        build_rule_based_graph(out.steps, config.induction));
    out.candidates.push_back(
        build_llm_graph(out.steps, gateway, 2, manifest.warnings));
    out.candidates.push_back(
        build_llm_graph(out.steps, gateway, 3, manifest.warnings));

    json steps = json::array();
    for (const auto& s : out.steps) {
        steps.push_back({{"category", std::string(to_string(s.category))},
                         {"position", s.position},
                         {"text", s.text},
                         {"context_hash", s.context_hash}});
    }
    write_artifact(manifest, config.output_dir / "steps.json",
                   steps.dump(2) + "\n");
    for (size_t i = 0; i < out.candidates.size(); ++i) {
        write_artifact(
            manifest,
            config.output_dir /
                ("graph.candidate" + std::to_string(i + 1) + ".json"),
            graph_to_json(out.candidates[i]).dump(2) + "\n");
    }
    return out;
}

inline ConceptGraph stage_merge(const std::vector<ConceptGraph>& candidates,
                                const PipelineConfig& config, Gateway* gateway,
                                RunManifest& manifest) {
    MergeReport report;
    ConceptGraph merged;
    if (config.merge_backend == MergeBackend::Model && gateway) {
        merged = merge_graphs_via_model(candidates, config.merge, *gateway,
                                        manifest.warnings, &report);
    } else {
        merged = merge_graphs(candidates, config.merge, &report);
    }
    write_artifact(manifest, config.output_dir / "graph.merged.json",
                   graph_to_json(merged).dump(2) + "\n");
    write_artifact(manifest, config.output_dir / "merge_report.json",
                   report.to_json().dump(2) + "\n");
    return merged;
}

inline GateResult stage_plan(const ConceptGraph& graph,
                             const PipelineConfig& config, Gateway& gateway,
                             RunManifest& manifest) {
    auto violations = validate_graph(graph);
    if (!violations.empty())
        throw ValidationError("graph fails validation", violations);
    auto plans =
        propose_plans(graph, gateway, config.planner, manifest.warnings);
    GateResult result = gate(plans, graph, config.planner, manifest.warnings);
    write_artifact(manifest, config.output_dir / "plan.json",
                   plan_to_json(result.selected).dump(2) + "\n");
    write_artifact(manifest, config.output_dir / "gate_report.json",
                   gate_result_to_json(result).dump(2) + "\n");
    return result;
}

inline DraftDocument stage_generate(const Plan& plan, const ConceptGraph& graph,
                                    const PipelineConfig& config,
                                    Gateway& gateway, RunManifest& manifest) {
    if (!plan_partitions_graph(plan, graph)) {
        std::vector<std::string> details;
        std::set<std::string> graph_ids;
        for (const auto& n : graph.nodes) graph_ids.insert(n.id);
        std::set<std::string> plan_ids;
        for (const auto& a : plan.assignments)
            for (const auto& id : a.node_ids) {
                if (!graph_ids.count(id))
                    details.push_back("plan references unknown node id " + id);
                if (!plan_ids.insert(id).second)
                    details.push_back("node id assigned twice: " + id);
            }
        for (const auto& id : graph_ids)
            if (!plan_ids.count(id))
                details.push_back("graph node missing from plan: " + id);
        throw ValidationError("plan does not partition the graph", details);
    }
    FewShotStore store(config.few_shot_dir);
    DraftDocument doc = generate_document(plan, graph, gateway,
                                          config.generator, store,
                                          manifest.warnings);
    write_artifact(manifest, config.output_dir / "description.md",
                   render_markdown(doc));
    write_artifact(manifest, config.output_dir / "validation.json",
                   draft_to_json(doc).dump(2) + "\n");
    return doc;
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

inline void record_gateway_stats(const Gateway& gateway,
                                 RunManifest& manifest) {
    for (const auto& rec : gateway.log()) manifest.gateway_calls[rec.tag]++;
}

inline RunManifest run_pipeline(const PipelineConfig& config,
                                Gateway& gateway) {
    RunManifest manifest;
    manifest.config_snapshot = config.snapshot();
    std::filesystem::create_directories(config.output_dir);
    auto timed = [&manifest](const std::string& stage, auto&& fn) {
        auto start = std::chrono::steady_clock::now();
        fn();
        auto end = std::chrono::steady_clock::now();
        manifest.timing_ms[stage] =
            std::chrono::duration<double, std::milli>(end - start).count();
    };
    try {
        InduceOutput induced;
        timed("induce",
              [&] { induced = stage_induce(config, gateway, manifest); });
        if (config.stop_after == "induce") {
            record_gateway_stats(gateway, manifest);
            manifest.write(config.output_dir / "manifest.json");
            return manifest;
        }
        ConceptGraph merged;
        timed("merge", [&] {
            merged = stage_merge(induced.candidates, config, &gateway, manifest);
        });
        if (config.stop_after == "merge") {
            record_gateway_stats(gateway, manifest);
            manifest.write(config.output_dir / "manifest.json");
            return manifest;
        }
        GateResult planned;
        timed("plan", [&] {
            planned = stage_plan(merged, config, gateway, manifest);
        });
        if (config.stop_after == "plan") {
            record_gateway_stats(gateway, manifest);
            manifest.write(config.output_dir / "manifest.json");
            return manifest;
        }
        timed("generate", [&] {
            stage_generate(planned.selected, merged, config, gateway, manifest);
        });
    } catch (...) {
        record_gateway_stats(gateway, manifest);
        try {
            manifest.error = "stage failure";
            if (auto ex = std::current_exception()) {
                try {
                    std::rethrow_exception(ex);
                } catch (const std::exception& e) {
                    manifest.error = e.what();
                }
            }
        } catch (...) {
        }
        manifest.write(config.output_dir / "manifest.json");
        throw;
    }
    record_gateway_stats(gateway, manifest);
    manifest.write(config.output_dir / "manifest.json");
    return manifest;
}

}  // namespace flowplan
