#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowplan/cli.hpp"
#include "flowplan/config.hpp"
#include "flowplan/pipeline.hpp"
#include "support/test_support.hpp"

using namespace flowplan;
using namespace flowplan::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("flowplan_pipe_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

// Backend sufficient for a full offline pipeline run.
std::shared_ptr<ScriptedBackend> full_run_backend() {
    return std::make_shared<ScriptedBackend>(
        [](const PromptRequest& req) -> std::string {
            if (req.tag == "induction")
                return "The document describes an adaptive noise filter.";
            if (req.tag == "graph")
                return R"({"nodes":[
                    {"id":"a","category":"TechProblem","label":"channel noise","detail":""},
                    {"id":"b","category":"Solution","label":"adaptive filter","detail":""}],
                    "edges":[["a","b","solves"]]})";
            if (req.tag == "plan") return "not a parseable plan";
            if (req.tag == "judge") return "95 faithful";
            return "Draft paragraph. " + req.user_text;
        });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
    std::vector<const char*> argv = {"flowplan"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace

TEST_CASE("config text parses sections, comments and quotes") {
    auto entries = parse_config_text(
        "# comment\n[gateway]\nmode = \"replay\"  # trailing\ntop_k = 4\n\n"
        "[planner]\nk = 3\n");
    CHECK(entries.at("gateway.mode") == "replay");
    CHECK(entries.at("gateway.top_k") == "4");
    CHECK(entries.at("planner.k") == "3");
}

TEST_CASE("config entries land in the pipeline config") {
    PipelineConfig config;
    apply_config_entries(config, {{"gateway.mode", "record"},
                                  {"planner.tau_c", "0.4"},
                                  {"merge.backend", "model"},
                                  {"generator.max_attempts", "2"},
                                  {"paths.output_dir", "/tmp/xyz"},
                                  {"stages.stop_after", "merge"}});
    CHECK(config.mode == GatewayMode::Record);
    CHECK(config.planner.tau_c == doctest::Approx(0.4));
    CHECK(config.merge_backend == MergeBackend::Model);
    CHECK(config.generator.max_attempts == 2);
    CHECK(config.output_dir == fs::path("/tmp/xyz"));
    CHECK(config.stop_after == "merge");
}

TEST_CASE("unknown config keys are rejected") {
    PipelineConfig config;
    CHECK_THROWS_AS(apply_config_entries(config, {{"planner.gamma", "1"}}),
                    ConfigError);
    CHECK_THROWS_AS(apply_config_entries(config, {{"planner.tau_c", "1.5"}}),
                    ConfigError);
    CHECK_THROWS_AS(apply_config_entries(config, {{"gateway.mode", "hybrid"}}),
                    ConfigError);
    CHECK_THROWS_AS(apply_config_entries(config, {{"planner.k", "0"}}),
                    ConfigError);
}

TEST_CASE("missing config file raises a config error") {
    CHECK_THROWS_AS(load_config_file("/nonexistent/flowplan.toml"), ConfigError);
}

TEST_CASE("stage_merge writes the merged graph and report") {
    TempDir dir;
    PipelineConfig config;
    config.output_dir = dir.path;
    RunManifest manifest;
    auto merged =
        stage_merge(appendix_candidates(), config, nullptr, manifest);
    CHECK(merged.nodes.size() == 5);
    CHECK(fs::exists(dir.path / "graph.merged.json"));
    CHECK(fs::exists(dir.path / "merge_report.json"));
    CHECK(manifest.artifacts.size() == 2);
    auto reloaded = load_graph_file(dir.path / "graph.merged.json");
    CHECK(graphs_equal(merged, reloaded));
}

TEST_CASE("stage_plan rejects invalid graphs before any model call") {
    TempDir dir;
    PipelineConfig config;
    config.output_dir = dir.path;
    ConceptGraph bad = make_graph({{Category::Solution, "s"}});
    bad.edges.push_back({bad.nodes[0].id, "missing", RelationType::Solves, 1,
                         false});
    auto backend = std::make_shared<ScriptedBackend>();
    Gateway gateway(GatewayMode::Live, dir.path / "cache", backend);
    RunManifest manifest;
    CHECK_THROWS_AS(stage_plan(bad, config, gateway, manifest),
                    ValidationError);
    CHECK(gateway.log().empty());
}

TEST_CASE("model-backed merge falls back when the reply is unparseable") {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->script("merge", {"no graph here"});
    Gateway gateway(GatewayMode::Live, "/tmp/unused", backend);
    std::vector<std::string> warnings;
    MergeConfig config;
    auto merged =
        merge_graphs_via_model(appendix_candidates(), config, gateway, warnings);
    CHECK(merged.nodes.size() == 5);
    REQUIRE_FALSE(warnings.empty());
}

TEST_CASE("full offline pipeline run produces every artifact") {
    TempDir dir;
    PipelineConfig config;
    config.mode = GatewayMode::Live;
    config.input = dir.path / "doc.md";
    config.output_dir = dir.path / "out";
    write_file(config.input,
               "# Adaptive Filtering\n\nNoise corrupts the channel. An "
               "adaptive filter removes it.\n");
    Gateway gateway(GatewayMode::Live, dir.path / "cache", full_run_backend());
    RunManifest manifest = run_pipeline(config, gateway);
    CHECK(manifest.error.empty());
    for (const char* name :
         {"steps.json", "graph.candidate1.json", "graph.candidate2.json",
          "graph.candidate3.json", "graph.merged.json", "merge_report.json",
          "plan.json", "gate_report.json", "description.md",
          "validation.json", "manifest.json"}) {
        CAPTURE(name);
        CHECK(fs::exists(config.output_dir / name));
    }
    CHECK(manifest.gateway_calls.at("induction") == 9);
    CHECK(manifest.timing_ms.count("induce") == 1);
    CHECK(manifest.timing_ms.count("generate") == 1);
}

TEST_CASE("stop_after halts the pipeline at the requested stage") {
    TempDir dir;
    PipelineConfig config;
    config.mode = GatewayMode::Live;
    config.input = dir.path / "doc.md";
    config.output_dir = dir.path / "out";
    config.stop_after = "induce";
    write_file(config.input, "A document about filters.\n");
    Gateway gateway(GatewayMode::Live, dir.path / "cache", full_run_backend());
    RunManifest manifest = run_pipeline(config, gateway);
    CHECK(fs::exists(config.output_dir / "graph.candidate3.json"));
    CHECK_FALSE(fs::exists(config.output_dir / "graph.merged.json"));
    CHECK_FALSE(fs::exists(config.output_dir / "description.md"));
    CHECK(manifest.gateway_calls.count("plan") == 0);
    CHECK(manifest.gateway_calls.count("generate") == 0);
}

TEST_CASE("a failing run still writes the manifest") {
    TempDir dir;
    PipelineConfig config;
    config.mode = GatewayMode::Live;
    config.input = dir.path / "doc.md";
    config.output_dir = dir.path / "out";
    write_file(config.input, "A document.\n");
    auto backend = std::make_shared<ScriptedBackend>(
        [](const PromptRequest&) -> std::string {
            throw std::runtime_error("connection refused");
        });
    Gateway gateway(GatewayMode::Live, dir.path / "cache", backend, 1);
    CHECK_THROWS_AS(run_pipeline(config, gateway), GatewayError);
    REQUIRE(fs::exists(config.output_dir / "manifest.json"));
    auto manifest = json::parse(
        read_text_file(config.output_dir / "manifest.json"));
    CHECK_FALSE(manifest.at("error").get<std::string>().empty());
}

TEST_CASE("a recorded run replays byte-identically with no backend") {
    TempDir dir;
    PipelineConfig config;
    config.mode = GatewayMode::Record;
    config.input = dir.path / "doc.md";
    config.output_dir = dir.path / "out_record";
    config.cache_dir = dir.path / "cache";
    write_file(config.input,
               "# Adaptive Filtering\n\nNoise corrupts the channel.\n");
    {
        Gateway gateway(GatewayMode::Record, config.cache_dir,
                        full_run_backend());
        run_pipeline(config, gateway);
    }
    std::string recorded =
        read_text_file(config.output_dir / "description.md");
    CHECK(fs::exists(config.cache_dir / "manifest.json"));

    config.mode = GatewayMode::Replay;
    config.output_dir = dir.path / "out_replay";
    Gateway replay(GatewayMode::Replay, config.cache_dir, nullptr);
    run_pipeline(config, replay);
    std::string replayed =
        read_text_file(config.output_dir / "description.md");
    CHECK(recorded == replayed);
    for (const auto& rec : replay.log()) CHECK_FALSE(rec.hash.empty());
}

TEST_CASE("cli validate: clean graph exits 0, broken graph exits 2") {
    TempDir dir;
    auto good = dir.path / "good.json";
    write_file(good, graph_to_json(make_graph({{Category::Solution, "s"}}))
                         .dump());
    std::ostringstream out, err;
    CHECK(run_cli({"validate", good.string()}, out, err) == 0);

    ConceptGraph bad = make_graph({{Category::Solution, "s"}});
    bad.edges.push_back({bad.nodes[0].id, "missing", RelationType::Solves, 1,
                         false});
    auto bad_path = dir.path / "bad.json";
    write_file(bad_path, graph_to_json(bad).dump());
    std::ostringstream out2, err2;
    CHECK(run_cli({"validate", bad_path.string()}, out2, err2) == 2);
    CHECK_FALSE(out2.str().empty());
}

TEST_CASE("cli validate checks a plan against the graph") {
    TempDir dir;
    ConceptGraph g = make_graph({{Category::Solution, "s"}});
    auto graph_path = dir.path / "g.json";
    write_file(graph_path, graph_to_json(g).dump());
    Plan plan = default_assignment(g);
    auto plan_path = dir.path / "p.json";
    write_file(plan_path, plan_to_json(plan).dump());
    std::ostringstream out, err;
    CHECK(run_cli({"validate", graph_path.string(), plan_path.string()}, out,
                  err) == 0);

    Plan empty_plan = default_assignment(ConceptGraph{});
    auto empty_path = dir.path / "empty.json";
    write_file(empty_path, plan_to_json(empty_plan).dump());
    std::ostringstream out2, err2;
    CHECK(run_cli({"validate", graph_path.string(), empty_path.string()}, out2,
                  err2) == 2);
}

TEST_CASE("cli merge runs offline and writes artifacts") {
    TempDir dir;
    auto candidates = appendix_candidates();
    std::vector<std::string> paths;
    for (size_t i = 0; i < candidates.size(); ++i) {
        auto p = dir.path / ("c" + std::to_string(i) + ".json");
        write_file(p, graph_to_json(candidates[i]).dump());
        paths.push_back(p.string());
    }
    std::ostringstream out, err;
    int code = run_cli({"--out", (dir.path / "out").string(), "merge",
                        paths[0], paths[1], paths[2]},
                       out, err);
    CHECK(code == 0);
    CHECK(fs::exists(dir.path / "out" / "graph.merged.json"));
    CHECK(fs::exists(dir.path / "out" / "manifest.json"));
}

TEST_CASE("cli surfaces bad config files as exit code 4") {
    TempDir dir;
    auto cfg = dir.path / "flowplan.toml";
    write_file(cfg, "[planner]\ngamma = 2\n");
    std::ostringstream out, err;
    CHECK(run_cli({"--config", cfg.string(), "validate", "x.json"}, out,
                  err) == 4);
    CHECK(err.str().find("unknown key") != std::string::npos);
}

TEST_CASE("cli surfaces missing inputs as exit code 2 with a manifest") {
    TempDir dir;
    std::ostringstream out, err;
    int code = run_cli({"--out", (dir.path / "out").string(), "generate",
                        (dir.path / "nope_plan.json").string(),
                        (dir.path / "nope_graph.json").string()},
                       out, err);
    CHECK(code == 2);
    CHECK(fs::exists(dir.path / "out" / "manifest.json"));
}

TEST_CASE("cli surfaces replay misses as exit code 3") {
    TempDir dir;
    ConceptGraph g = make_graph({{Category::Solution, "s"},
                                 {Category::TechProblem, "p"}});
    auto graph_path = dir.path / "g.json";
    write_file(graph_path, graph_to_json(g).dump());
    std::ostringstream out, err;
    int code = run_cli({"--mode", "replay", "--cache",
                        (dir.path / "empty_cache").string(), "--out",
                        (dir.path / "out").string(), "plan",
                        graph_path.string()},
                       out, err);
    CHECK(code == 3);
    CHECK(fs::exists(dir.path / "out" / "manifest.json"));
}

TEST_CASE("cli plan with a single candidate plan makes no model calls") {
    TempDir dir;
    ConceptGraph g = make_graph({{Category::Solution, "s"},
                                 {Category::TechProblem, "p"}});
    auto graph_path = dir.path / "g.json";
    write_file(graph_path, graph_to_json(g).dump());
    std::ostringstream out, err;
    int code = run_cli({"--mode", "replay", "--k", "1", "--cache",
                        (dir.path / "empty_cache").string(), "--out",
                        (dir.path / "out").string(), "plan",
                        graph_path.string()},
                       out, err);
    CHECK(code == 0);
    CHECK(fs::exists(dir.path / "out" / "plan.json"));
    CHECK(fs::exists(dir.path / "out" / "gate_report.json"));
}

TEST_CASE("cli rejects unknown gateway modes at parse time") {
    std::ostringstream out, err;
    CHECK(run_cli({"--mode", "psychic", "validate", "x.json"}, out, err) != 0);
}
