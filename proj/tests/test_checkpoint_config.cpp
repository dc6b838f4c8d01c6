#include <filesystem>
#include <fstream>

#include "catch_amalgamated.hpp"
#include "pagc/agent.hpp"
#include "pagc/checkpoint.hpp"
#include "pagc/config.hpp"
#include "pagc/io.hpp"

using namespace pagc;

namespace {

std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "pagc_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("checkpoint round-trips byte-identically") {
    AgentParams<float> p;
    p.init(404);
    std::string a = temp_path("rt_a.ckpt"), b = temp_path("rt_b.ckpt");
    write_checkpoint(a, p.store);
    AgentParams<float> q;
    load_checkpoint(a, q.store);
    write_checkpoint(b, q.store);
    CHECK(file_hash(a) == file_hash(b));
    for (size_t i = 0; i < p.store.tensors.size(); ++i)
        CHECK(p.store.tensors[i].v == q.store.tensors[i].v);
}

TEST_CASE("checkpoint corruption is detected") {
    AgentParams<float> p;
    p.init(405);
    std::string path = temp_path("corrupt.ckpt");
    write_checkpoint(path, p.store);

    SECTION("flipped payload byte fails the checksum and names the file") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        char c;
        f.seekg(64);
        f.get(c);
        f.seekp(64);
        f.put(static_cast<char>(c ^ 0x5a));
        f.close();
        try {
            read_checkpoint(path);
            FAIL("expected checksum failure");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("checksum") != std::string::npos);
            CHECK(std::string(e.what()).find("corrupt.ckpt") != std::string::npos);
        }
    }
    SECTION("bad magic rejected") {
        std::string text = read_text_file(path);
        text[0] = 'X';
        write_text_file(path, text);
        CHECK_THROWS_AS(read_checkpoint(path), std::runtime_error);
    }
    SECTION("truncation rejected") {
        std::string text = read_text_file(path);
        write_text_file(path, text.substr(0, text.size() / 2));
        CHECK_THROWS_AS(read_checkpoint(path), std::runtime_error);
    }
}

TEST_CASE("checkpoint apply validates names and shapes") {
    AgentParams<float> p;
    p.init(406);
    std::string path = temp_path("shape.ckpt");
    write_checkpoint(path, p.store);
    auto groups = read_checkpoint(path);

    SECTION("loads into a matching store") {
        AgentParams<float> q;
        apply_checkpoint(groups, q.store, path);
        CHECK(q.store.tensors[0].v == p.store.tensors[0].v);
    }
    SECTION("group count mismatch rejected") {
        ParamStore<float> small;
        small.add("encoder.w0", {kMlpHidden, kPatchDim});
        CHECK_THROWS_AS(apply_checkpoint(groups, small, path), std::runtime_error);
    }
    SECTION("shape mismatch rejected") {
        AgentParams<float> q;
        auto bad = groups;
        bad[0].shape[0] += 1;
        CHECK_THROWS_AS(apply_checkpoint(bad, q.store, path), std::runtime_error);
    }
}

TEST_CASE("config parses defaults and rejects unknown keys") {
    RunConfig base = parse_config(R"({"schema_version": 1})");
    CHECK(base.world_seed == 0u);
    CHECK(base.stage1_seeds == 5);
    CHECK(base.stage2_seeds == 6);
    CHECK(base.stage1.total_steps == 36000);
    CHECK(base.stage1.fixed_alpha == 0.10f);
    CHECK(base.stage2.alpha_lo == 0.03f);
    CHECK(base.stage2.episodes == 150);

    SECTION("unknown top-level key named in the error") {
        try {
            parse_config(R"({"schema_version": 1, "wrold_seed": 3})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("wrold_seed") != std::string::npos);
        }
    }
    SECTION("unknown nested key named with its scope") {
        try {
            parse_config(R"({"schema_version": 1, "stage1": {"sigmaleft": 0.5}})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("stage1.sigmaleft") != std::string::npos);
        }
    }
    SECTION("schema_version required and checked") {
        CHECK_THROWS_AS(parse_config(R"({})"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})"), ConfigError);
    }
    SECTION("invalid values rejected") {
        CHECK_THROWS_AS(parse_config(R"({"schema_version":1,"stage1":{"sigma_left":-0.2}})"),
                        ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"schema_version":1,"stage2":{"episodes":100}})"),
                        ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"schema_version":1,"seed_grid":{"stage1":0}})"),
                        ConfigError);
        CHECK_THROWS_AS(parse_config("not json"), ConfigError);
    }
}

TEST_CASE("config round-trips through serialization") {
    RunConfig cfg = parse_config(R"({
        "schema_version": 1,
        "world_seed": 17,
        "probe_seed": 99,
        "out_dir": "elsewhere",
        "seed_grid": {"stage1": 2, "stage2": 3},
        "stage1": {"sigma_left": 0.5, "total_steps": 4800, "lambda_actor": 0.25},
        "stage2": {"block_len": 10, "episodes": 30, "alpha_hi": 0.25}
    })");
    RunConfig again = parse_config(serialize_config(cfg));
    CHECK(again == cfg);
    CHECK(again.stage1.weights.actor == 0.25f);
    CHECK(again.stage2.block_len == 10);
}
