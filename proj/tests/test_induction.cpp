#include <doctest.h>

#include "flowplan/induction.hpp"
#include "support/test_support.hpp"

using namespace flowplan;
using namespace flowplan::testing;

namespace {

const char* kGraph1 = R"(Graph 1:
{
  "nodes": ["Problem", "Solution", "Effect"],
  "edges": [["Problem","Solution","solves"],
            ["Solution","Effect","improves"]]
})";

const char* kGraph2 = R"({
  "nodes": ["Problem", "Solution", "Implementation", "Effect"],
  "edges": [["Problem","Solution","solves"],
            ["Solution","Implementation","implements"],
            ["Implementation","Effect","causes"]]
})";

std::vector<ReasoningStep> make_steps() {
    std::vector<ReasoningStep> steps;
    for (size_t i = 0; i < kAllCategories.size(); ++i) {
        ReasoningStep s;
        s.category = kAllCategories[i];
        s.position = static_cast<int>(i) + 1;
        s.text = "Step text for " + std::string(to_string(s.category)) +
                 ". More detail follows.";
        steps.push_back(std::move(s));
    }
    return steps;
}

Gateway scripted_gateway(std::shared_ptr<ScriptedBackend> backend) {
    return Gateway(GatewayMode::Live, "/tmp/flowplan_unused_cache", backend);
}

}  // namespace

TEST_CASE("run_reasoning_chain produces nine steps in listing order") {
    auto backend = std::make_shared<ScriptedBackend>();
    std::vector<std::string> replies;
    for (auto cat : kAllCategories)
        replies.push_back("Text for " + std::string(to_string(cat)));
    backend->script("induction", replies);
    auto gateway = scripted_gateway(backend);

    Document doc = Document::from_text("An example paper about filters.");
    std::vector<std::string> warnings;
    auto steps = run_reasoning_chain(doc, gateway, {}, warnings);

    REQUIRE(steps.size() == 9);
    for (size_t i = 0; i < steps.size(); ++i) {
        CHECK(steps[i].position == static_cast<int>(i) + 1);
        CHECK(steps[i].category == kAllCategories[i]);
    }
    CHECK(gateway.call_count("induction") == 9);
    CHECK(warnings.empty());

    // the Solution step (position 5) embeds the texts of steps 1..4
    auto log = gateway.log();
    const auto& solution_req = log[4].request;
    for (size_t i = 0; i < 4; ++i) {
        CHECK(solution_req.user_text.find(steps[i].text) != std::string::npos);
    }
    // prompts open with the category primer
    CHECK(log[0].request.system_text.find(
              "The present invention relates to") != std::string::npos);
    CHECK(log[1].request.system_text.find("prior art") != std::string::npos);
}

TEST_CASE("empty step replies degrade to unspecified with a warning") {
    auto backend = std::make_shared<ScriptedBackend>(
        [](const PromptRequest& req) -> std::string {
            if (req.system_text.find("PriorArt") != std::string::npos)
                return "   \n";
            return "some text";
        });
    auto gateway = scripted_gateway(backend);
    Document doc = Document::from_text("paper");
    std::vector<std::string> warnings;
    auto steps = run_reasoning_chain(doc, gateway, {}, warnings);
    CHECK(steps[2].text == "unspecified");
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("PriorArt") != std::string::npos);
    // one retry for the empty step
    CHECK(gateway.call_count("induction") == 10);
}

TEST_CASE("empty document is a precondition error") {
    CHECK_THROWS_AS(Document::from_text(""), std::invalid_argument);
}

TEST_CASE("long documents are truncated head-weighted") {
    bool truncated = false;
    std::string text(1000, 'a');
    auto out = truncate_head_weighted(text, 100, &truncated);
    CHECK(truncated);
    CHECK(out.find("[truncated]") != std::string::npos);
    truncated = true;
    auto same = truncate_head_weighted("short", 100, &truncated);
    CHECK_FALSE(truncated);
    CHECK(same == "short");
}

TEST_CASE("build_rule_based_graph instantiates the template table") {
    auto steps = make_steps();
    auto graph = build_rule_based_graph(steps);
    CHECK(graph.nodes.size() == 9);
    CHECK(graph.edges.size() == 8);
    CHECK(validate_graph(graph).empty());
    for (const auto& e : graph.edges) CHECK(e.votes == 1);
    for (const auto& n : graph.nodes)
        CHECK(n.provenance.candidates == std::set<int>{1});
}

TEST_CASE("unspecified Figure removes the node and its template edge") {
    auto steps = make_steps();
    steps[8].text = "unspecified";
    auto graph = build_rule_based_graph(steps);
    CHECK(graph.nodes.size() == 8);
    CHECK(graph.edges.size() == 7);
}

TEST_CASE("a single specified category yields one node and no edges") {
    auto steps = make_steps();
    for (size_t i = 1; i < steps.size(); ++i) steps[i].text = "unspecified";
    auto graph = build_rule_based_graph(steps);
    CHECK(graph.nodes.size() == 1);
    CHECK(graph.edges.empty());
}

TEST_CASE("build_rule_based_graph is a pure function of step texts") {
    auto steps = make_steps();
    auto a = build_rule_based_graph(steps);
    auto b = build_rule_based_graph(steps);
    CHECK(graph_to_json(a).dump() == graph_to_json(b).dump());
}

TEST_CASE("build_rule_based_graph requires all nine steps") {
    auto steps = make_steps();
    steps.resize(5);
    CHECK_THROWS_AS(build_rule_based_graph(steps), std::invalid_argument);
}

TEST_CASE("node label is the first sentence truncated to 120 chars") {
    CHECK(first_sentence("One. Two.", 120) == "One");
    std::string long_text(300, 'x');
    CHECK(first_sentence(long_text, 120).size() == 120);
}

TEST_CASE("parse_graph_json handles bare label aliases") {
    std::vector<std::string> warnings;
    auto graph = parse_graph_json(kGraph1, warnings);
    REQUIRE(graph.nodes.size() == 3);
    CHECK(graph.nodes[0].category == Category::TechProblem);
    CHECK(graph.nodes[0].label == "Problem");
    CHECK(graph.nodes[1].category == Category::Solution);
    CHECK(graph.nodes[2].category == Category::Effects);
    REQUIRE(graph.edges.size() == 2);
    CHECK(graph.edges[0].relation == RelationType::Solves);
    CHECK(graph.edges[1].relation == RelationType::Improves);
    CHECK(warnings.empty());
    CHECK(validate_graph(graph).empty());
}

TEST_CASE("parse_graph_json ignores surrounding prose") {
    std::vector<std::string> warnings;
    auto graph = parse_graph_json(
        "here you go: " + std::string(kGraph2) + " hope that helps!",
        warnings);
    CHECK(graph.nodes.size() == 4);
    CHECK(graph.edges.size() == 3);
}

TEST_CASE("parse_graph_json drops bad edges with warnings") {
    std::vector<std::string> warnings;
    auto graph = parse_graph_json(
        R"({"nodes": ["Problem", "Solution"],
            "edges": [["Problem","Problem","causes"],
                      ["Problem","Solution","enables"],
                      ["Problem","Missing","solves"],
                      ["Problem","Solution","solves"]]})",
        warnings);
    CHECK(graph.edges.size() == 1);
    CHECK(warnings.size() == 3);
    CHECK(validate_graph(graph).empty());
}

TEST_CASE("parse_graph_json defaults unknown categories to Solution") {
    std::vector<std::string> warnings;
    auto graph = parse_graph_json(
        R"({"nodes": ["quantum flux device"], "edges": []})", warnings);
    REQUIRE(graph.nodes.size() == 1);
    CHECK(graph.nodes[0].category == Category::Solution);
    REQUIRE(warnings.size() == 1);
}

TEST_CASE("parse_graph_json reports the byte offset on failure") {
    std::vector<std::string> warnings;
    std::string text = "no json object here at all";
    try {
        parse_graph_json(text, warnings);
        FAIL("expected GraphParseError");
    } catch (const GraphParseError& ex) {
        CHECK(ex.byte_offset == text.size());
    }
}

TEST_CASE("build_llm_graph parses a scripted candidate") {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->script("graph", {kGraph2});
    auto gateway = scripted_gateway(backend);
    std::vector<std::string> warnings;
    auto graph = build_llm_graph(make_steps(), gateway, 2, warnings);
    CHECK(graph.nodes.size() == 4);
    CHECK(graph.edges.size() == 3);
    for (const auto& n : graph.nodes)
        CHECK(n.provenance.candidates == std::set<int>{2});
}

TEST_CASE("build_llm_graph retries once then degrades to empty") {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->script("graph", {"garbage", "still garbage"});
    auto gateway = scripted_gateway(backend);
    std::vector<std::string> warnings;
    auto graph = build_llm_graph(make_steps(), gateway, 3, warnings);
    CHECK(graph.empty());
    CHECK(gateway.call_count("graph") == 2);
    REQUIRE_FALSE(warnings.empty());
    CHECK(warnings.back().find("empty graph") != std::string::npos);
}

TEST_CASE("build_llm_graph repair retry quotes the parse error") {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->script("graph", {"garbage", kGraph2});
    auto gateway = scripted_gateway(backend);
    std::vector<std::string> warnings;
    auto graph = build_llm_graph(make_steps(), gateway, 2, warnings);
    CHECK(graph.nodes.size() == 4);
    auto log = gateway.log();
    REQUIRE(log.size() == 2);
    CHECK(log[1].request.user_text.find("could not be parsed") !=
          std::string::npos);
}

TEST_CASE("variant 3 prompts ask for extra cross-category dependencies") {
    auto p2 = graph_prompt(make_steps(), 2);
    auto p3 = graph_prompt(make_steps(), 3);
    CHECK(p3.system_text != p2.system_text);
    CHECK(p3.system_text.find("cross-category") != std::string::npos);
}
