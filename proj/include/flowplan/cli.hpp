#pragma once

#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowplan/config.hpp"
#include "flowplan/http_backend.hpp"
#include "flowplan/pipeline.hpp"

namespace flowplan {

// Exit codes: 0 success (possibly with warnings), 2 input/validation error,
// 3 gateway error, 4 config error.
enum ExitCode {
    kExitOk = 0,
    kExitInput = 2,
    kExitGateway = 3,
    kExitConfig = 4,
};

inline std::shared_ptr<Gateway> make_gateway(const PipelineConfig& config) {
    std::shared_ptr<Backend> backend;
    if (config.mode != GatewayMode::Replay)
        backend = std::make_shared<HttpBackend>(ProviderSettings::from_env());
    return std::make_shared<Gateway>(config.mode, config.cache_dir, backend,
                                     config.max_retries);
}

inline int cli_main(int argc, const char* const* argv,
                    std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    CLI::App app{"flowplan: paper-to-patent description pipeline"};
    app.require_subcommand(1);

    std::string config_path, mode_flag, stop_after;
    PipelineConfig config;
    bool have_k = false, have_tau_c = false, have_tau_s = false,
         have_attempts = false;
    int k = 5, max_attempts = 3;
    double tau_c = 0.5, tau_s = 0.6;
    std::string output_dir, cache_dir, few_shot_dir;

    app.add_option("--config", config_path, "TOML-style config file");
    app.add_option("--mode", mode_flag, "Gateway mode: live|record|replay")
        ->check(CLI::IsMember({"live", "record", "replay"}));
    app.add_option("--k", k, "Number of candidate plans")
        ->check(CLI::PositiveNumber)
        ->each([&](const std::string&) { have_k = true; });
    app.add_option("--tau-c", tau_c, "Connectivity threshold")
        ->each([&](const std::string&) { have_tau_c = true; });
    app.add_option("--tau-s", tau_s, "Consistency threshold")
        ->each([&](const std::string&) { have_tau_s = true; });
    app.add_option("--max-attempts", max_attempts,
                   "Generation attempts per section")
        ->each([&](const std::string&) { have_attempts = true; });
    app.add_option("--stop-after", stop_after,
                   "Stop the run after this stage")
        ->check(CLI::IsMember({"induce", "merge", "plan", "generate"}));
    app.add_option("--out", output_dir, "Output directory");
    app.add_option("--cache", cache_dir, "Replay cache directory");
    app.add_option("--few-shot", few_shot_dir, "Few-shot exemplar directory");

    std::string input_path, graph_path, plan_path, validate_plan_path;
    std::vector<std::string> merge_candidates;
    bool plan_merge_flag = false;

    auto* induce = app.add_subcommand("induce", "Reasoning chain + candidates");
    induce->add_option("input", input_path, "Input document")->required();

    auto* merge_cmd = app.add_subcommand("merge", "Merge candidate graphs");
    merge_cmd->add_option("candidates", merge_candidates,
                          "Three candidate graph files")
        ->expected(3);

    auto* plan_cmd = app.add_subcommand("plan", "Plan sections and gate");
    plan_cmd->add_option("graphs", merge_candidates,
                         "Merged graph file, or three candidates with --merge")
        ->expected(1, 3);
    plan_cmd->add_flag("--merge", plan_merge_flag,
                       "Treat inputs as candidates and merge first");

    auto* generate = app.add_subcommand("generate", "Generate the draft");
    generate->add_option("plan", plan_path, "Plan file")->required();
    generate->add_option("graph", graph_path, "Merged graph file")->required();

    auto* run = app.add_subcommand("run", "Full pipeline");
    run->add_option("input", input_path, "Input document")->required();

    auto* validate = app.add_subcommand("validate", "Validate graph/plan files");
    validate->add_option("graph", graph_path, "Graph file")->required();
    validate->add_option("plan", validate_plan_path, "Optional plan file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        err << ex.what() << "\n";
        return ex.get_exit_code() == 0 ? kExitOk : kExitConfig;
    }

    RunManifest manifest;
    try {
        if (!config_path.empty()) config = load_config_file(config_path);
        if (!mode_flag.empty()) {
            apply_config_entries(config, {{"gateway.mode", mode_flag}});
        }
        if (have_k) config.planner.k = k;
        if (have_tau_c)
            apply_config_entries(config,
                                 {{"planner.tau_c", std::to_string(tau_c)}});
        if (have_tau_s)
            apply_config_entries(config,
                                 {{"planner.tau_s", std::to_string(tau_s)}});
        if (have_attempts)
            apply_config_entries(
                config,
                {{"generator.max_attempts", std::to_string(max_attempts)}});
        if (!stop_after.empty()) config.stop_after = stop_after;
        if (!output_dir.empty()) config.output_dir = output_dir;
        if (!cache_dir.empty()) config.cache_dir = cache_dir;
        if (!few_shot_dir.empty()) config.few_shot_dir = few_shot_dir;

        manifest.config_snapshot = config.snapshot();
        std::filesystem::create_directories(config.output_dir);

        auto finish = [&](const Gateway* gw) {
            if (gw) record_gateway_stats(*gw, manifest);
            manifest.write(config.output_dir / "manifest.json");
            for (const auto& w : manifest.warnings) err << "warning: " << w << "\n";
            return kExitOk;
        };

        if (*induce) {
            config.input = input_path;
            auto gateway = make_gateway(config);
            try {
                stage_induce(config, *gateway, manifest);
            } catch (...) {
                record_gateway_stats(*gateway, manifest);
                throw;
            }
            return finish(gateway.get());
        }
        if (*merge_cmd) {
            std::vector<ConceptGraph> candidates;
            for (const auto& p : merge_candidates)
                candidates.push_back(load_graph_file(p));
            std::shared_ptr<Gateway> gateway;
            if (config.merge_backend == MergeBackend::Model)
                gateway = make_gateway(config);
            stage_merge(candidates, config, gateway.get(), manifest);
            return finish(gateway.get());
        }
        if (*plan_cmd) {
            ConceptGraph graph;
            if (plan_merge_flag) {
                if (merge_candidates.size() != 3)
                    throw ValidationError(
                        "--merge requires exactly three candidate files");
                std::vector<ConceptGraph> candidates;
                for (const auto& p : merge_candidates)
                    candidates.push_back(load_graph_file(p));
                graph = stage_merge(candidates, config, nullptr, manifest);
            } else {
                if (merge_candidates.size() != 1)
                    throw ValidationError(
                        "plan expects one merged graph file (or --merge)");
                graph = load_graph_file(merge_candidates.front());
            }
            auto gateway = make_gateway(config);
            try {
                stage_plan(graph, config, *gateway, manifest);
            } catch (...) {
                record_gateway_stats(*gateway, manifest);
                throw;
            }
            return finish(gateway.get());
        }
        if (*generate) {
            ConceptGraph graph = load_graph_file(graph_path);
            Plan plan = load_plan_file(plan_path);
            auto gateway = make_gateway(config);
            try {
                stage_generate(plan, graph, config, *gateway, manifest);
            } catch (...) {
                record_gateway_stats(*gateway, manifest);
                throw;
            }
            return finish(gateway.get());
        }
        if (*run) {
            config.input = input_path;
            auto gateway = make_gateway(config);
            manifest = run_pipeline(config, *gateway);
            for (const auto& w : manifest.warnings)
                err << "warning: " << w << "\n";
            return kExitOk;
        }
        if (*validate) {
            ConceptGraph graph = load_graph_file(graph_path);
            auto violations = validate_graph(graph);
            for (const auto& v : violations) out << v << "\n";
            if (!validate_plan_path.empty()) {
                Plan plan = load_plan_file(validate_plan_path);
                if (!plan_partitions_graph(plan, graph)) {
                    out << "plan does not partition the graph\n";
                    return kExitInput;
                }
            }
            return violations.empty() ? kExitOk : kExitInput;
        }
        return kExitConfig;
    } catch (const ConfigError& ex) {
        err << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const GatewayError& ex) {
        err << "gateway error: " << ex.what() << "\n";
        manifest.error = ex.what();
        manifest.write(config.output_dir / "manifest.json");
        return kExitGateway;
    } catch (const ValidationError& ex) {
        err << "error: " << ex.what() << "\n";
        for (const auto& v : ex.violations) err << "  " << v << "\n";
        manifest.error = ex.what();
        manifest.write(config.output_dir / "manifest.json");
        return kExitInput;
    } catch (const IoError& ex) {
        err << "error: " << ex.what() << "\n";
        manifest.error = ex.what();
        manifest.write(config.output_dir / "manifest.json");
        return kExitInput;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        manifest.error = ex.what();
        manifest.write(config.output_dir / "manifest.json");
        return kExitInput;
    }
}

}  // namespace flowplan
