#include <doctest.h>

#include <filesystem>

#include "flowplan/gateway.hpp"
#include "support/test_support.hpp"

using namespace flowplan;
using namespace flowplan::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("flowplan_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

PromptRequest sample_request() {
    PromptRequest r;
    r.system_text = "system";
    r.user_text = "user";
    r.few_shot = {{"q1", "a1"}, {"q2", "a2"}};
    r.tag = "induction";
    return r;
}

}  // namespace

TEST_CASE("canonical_hash is independent of construction order") {
    PromptRequest a;
    a.tag = "plan";
    a.user_text = "hello";
    a.system_text = "sys";
    PromptRequest b;
    b.system_text = "sys";
    b.user_text = "hello";
    b.tag = "plan";
    CHECK(canonical_hash(a) == canonical_hash(b));
}

TEST_CASE("canonical_hash normalizes CRLF to LF") {
    PromptRequest a = sample_request();
    PromptRequest b = sample_request();
    a.user_text = "line1\r\nline2";
    b.user_text = "line1\nline2";
    CHECK(canonical_hash(a) == canonical_hash(b));
}

TEST_CASE("canonical_hash covers every field") {
    PromptRequest base = sample_request();
    auto h = canonical_hash(base);

    PromptRequest t = base;
    t.temperature = 0.3;
    CHECK(canonical_hash(t) != h);

    PromptRequest k = base;
    k.top_k = 5;
    CHECK(canonical_hash(k) != h);

    PromptRequest shots = base;
    std::swap(shots.few_shot[0], shots.few_shot[1]);
    CHECK(canonical_hash(shots) != h);

    PromptRequest tag = base;
    tag.tag = "judge";
    CHECK(canonical_hash(tag) != h);
}

TEST_CASE("defaults are temperature 0.2 and top_k 10") {
    PromptRequest r;
    CHECK(r.temperature == doctest::Approx(0.2));
    CHECK(r.top_k == 10);
}

TEST_CASE("record then replay returns byte-identical text") {
    TempDir dir;
    auto backend = std::make_shared<ScriptedBackend>(
        [](const PromptRequest&) { return std::string("X\nwith lines\n"); });
    Gateway recorder(GatewayMode::Record, dir.path, backend);
    PromptRequest req = sample_request();
    auto live = recorder.complete(req);
    CHECK(live.source == CompletionSource::Live);

    Gateway replayer(GatewayMode::Replay, dir.path);
    auto replayed = replayer.complete(req);
    CHECK(replayed.source == CompletionSource::Replay);
    CHECK(replayed.text == live.text);
    CHECK(replayed.request_hash == live.request_hash);

    // store layout: cache/<tag>/<hash>.txt plus manifest
    CHECK(fs::exists(dir.path / "induction" / (live.request_hash + ".txt")));
    CHECK(fs::exists(dir.path / "manifest.json"));
}

TEST_CASE("replay miss names the hash and tag") {
    TempDir dir;
    Gateway gateway(GatewayMode::Replay, dir.path);
    PromptRequest req = sample_request();
    req.tag = "judge";
    try {
        gateway.complete(req);
        FAIL("expected ReplayMissError");
    } catch (const ReplayMissError& ex) {
        CHECK(ex.tag == "judge");
        CHECK(ex.hash == canonical_hash(req));
        CHECK(std::string(ex.what()).find("judge") != std::string::npos);
    }
}

TEST_CASE("live failures retry then surface attempt count") {
    TempDir dir;
    int calls = 0;
    auto backend = std::make_shared<ScriptedBackend>(
        [&calls](const PromptRequest&) -> std::string {
            ++calls;
            throw std::runtime_error("boom");
        });
    Gateway gateway(GatewayMode::Live, dir.path, backend, 3);
    try {
        gateway.complete(sample_request());
        FAIL("expected TransportError");
    } catch (const TransportError& ex) {
        CHECK(ex.attempts == 3);
    }
    CHECK(calls == 3);
}

TEST_CASE("gateway log records tags in call order") {
    TempDir dir;
    auto backend = std::make_shared<ScriptedBackend>(
        [](const PromptRequest&) { return std::string("ok"); });
    Gateway gateway(GatewayMode::Live, dir.path, backend);
    PromptRequest a = sample_request();
    a.tag = "plan";
    PromptRequest b = sample_request();
    b.tag = "generate";
    gateway.complete(a);
    gateway.complete(b);
    auto log = gateway.log();
    REQUIRE(log.size() == 2);
    CHECK(log[0].tag == "plan");
    CHECK(log[1].tag == "generate");
    CHECK(gateway.call_count("plan") == 1);
}
