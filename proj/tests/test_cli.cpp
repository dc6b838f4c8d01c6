// End-to-end tests against the built binary (path injected by CMake).
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "catch_amalgamated.hpp"
#include "json.hpp"
#include "pagc/checkpoint.hpp"
#include "pagc/io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = PAGC_CLI_PATH;

struct Sandbox {
    fs::path dir;
    Sandbox(const std::string& name) {
        dir = fs::temp_directory_path() / ("pagc_cli_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }
    std::string path(const std::string& rel) const { return (dir / rel).string(); }
};

int run_cmd(const std::string& args, const std::string& log_path) {
    std::string cmd = kCli + " " + args + " > " + log_path + " 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string tiny_config_json(const std::string& out_dir) {
    return std::string(R"({
  "schema_version": 1,
  "world_seed": 5,
  "probe_seed": 77,
  "out_dir": ")") + out_dir + R"(",
  "seed_grid": {"stage1": 2, "stage2": 2},
  "stage1": {"total_steps": 960},
  "stage2": {"episodes": 36, "block_len": 12}
})";
}

}  // namespace

TEST_CASE("cli rejects a corrupted config without writing files") {
    Sandbox sb("badcfg");
    std::string cfg = sb.path("cfg.json");
    pagc::write_text_file(cfg, R"({"schema_version": 1, "wrold_seed": 2})");
    int code = run_cmd("train-stage1 --config " + cfg + " --out " + sb.path("out"),
                       sb.path("log.txt"));
    CHECK(code == 2);
    CHECK_FALSE(fs::exists(sb.path("out")));
    std::string log = pagc::read_text_file(sb.path("log.txt"));
    CHECK(log.find("wrold_seed") != std::string::npos);
}

TEST_CASE("cli rejects unknown conditions listing the valid ones") {
    Sandbox sb("badcond");
    std::string cfg = sb.path("cfg.json");
    pagc::write_text_file(cfg, tiny_config_json(sb.path("out")));
    int code = run_cmd("run --config " + cfg + " --condition bogus", sb.path("log.txt"));
    CHECK(code == 2);
    std::string log = pagc::read_text_file(sb.path("log.txt"));
    CHECK(log.find("mixed") != std::string::npos);
    CHECK(log.find("ablation-rigid") != std::string::npos);
}

TEST_CASE("cli pipeline end to end on a tiny grid") {
    Sandbox sb("pipeline");
    std::string cfg = sb.path("cfg.json");
    std::string out = sb.path("out");
    pagc::write_text_file(cfg, tiny_config_json(out));

    SECTION("everything") {
        // stage 1: deterministic checkpoints
        REQUIRE(run_cmd("train-stage1 --config " + cfg, sb.path("t1.txt")) == 0);
        REQUIRE(fs::exists(out + "/checkpoints/stage1_seed0.ckpt"));
        REQUIRE(fs::exists(out + "/checkpoints/stage1_seed1.ckpt"));
        REQUIRE(fs::exists(out + "/stage1_metrics.csv"));
        uint64_t h0 = pagc::file_hash(out + "/checkpoints/stage1_seed0.ckpt");
        REQUIRE(run_cmd("train-stage1 --config " + cfg, sb.path("t1b.txt")) == 0);
        CHECK(pagc::file_hash(out + "/checkpoints/stage1_seed0.ckpt") == h0);

        // run one condition
        REQUIRE(run_cmd("run --config " + cfg + " --condition mixed", sb.path("r1.txt")) == 0);
        REQUIRE(fs::exists(out + "/runs/mixed/manifest.json"));
        REQUIRE(fs::exists(out + "/runs/mixed/s1_0_s2_0.csv"));
        REQUIRE(fs::exists(out + "/runs/mixed/s1_1_s2_1.ckpt"));

        // rerun refuses without --force
        CHECK(run_cmd("run --config " + cfg + " --condition mixed", sb.path("r2.txt")) == 1);
        std::string refuse = pagc::read_text_file(sb.path("r2.txt"));
        CHECK(refuse.find("--force") != std::string::npos);

        // rerun with --force is deterministic
        std::string log_before = pagc::read_text_file(out + "/runs/mixed/s1_0_s2_0.csv");
        REQUIRE(run_cmd("run --config " + cfg + " --condition mixed --force",
                        sb.path("r3.txt")) == 0);
        CHECK(pagc::read_text_file(out + "/runs/mixed/s1_0_s2_0.csv") == log_before);

        // probe on a completed mixed run
        REQUIRE(run_cmd("probe --config " + cfg + " --run mixed:0:0", sb.path("p1.txt")) == 0);
        REQUIRE(fs::exists(out + "/probe/mixed_s1_0_s2_0.json"));
        auto assay = nlohmann::json::parse(
            pagc::read_text_file(out + "/probe/mixed_s1_0_s2_0.json"));
        CHECK(assay.at("z_raw_identical").get<bool>());
        CHECK(assay.at("probes").size() == 25u);

        // probe rejects non-mixed runs
        CHECK(run_cmd("probe --config " + cfg + " --run baseline:0:0", sb.path("p2.txt")) == 2);

        // analyze: incomplete without the other conditions
        REQUIRE(run_cmd("analyze --config " + cfg, sb.path("a1.txt")) == 0);
        auto verdict = nlohmann::json::parse(
            pagc::read_text_file(out + "/analysis/acceptance.json"));
        CHECK(verdict.at("verdict") == "incomplete");
        REQUIRE(fs::exists(out + "/analysis/fig3_residue.csv"));

        // tampered checkpoint: probe reports the checksum error and the file
        {
            std::fstream f(out + "/runs/mixed/s1_0_s2_0.ckpt",
                           std::ios::in | std::ios::out | std::ios::binary);
            f.seekp(100);
            f.put('\x7f');
        }
        CHECK(run_cmd("probe --config " + cfg + " --run mixed:0:0", sb.path("p3.txt")) == 1);
        std::string perr = pagc::read_text_file(sb.path("p3.txt"));
        CHECK(perr.find("checksum") != std::string::npos);
        CHECK(perr.find("s1_0_s2_0.ckpt") != std::string::npos);
    }
}

TEST_CASE("cli PAGC_OUT overrides --out") {
    Sandbox sb("envout");
    std::string cfg = sb.path("cfg.json");
    pagc::write_text_file(cfg, tiny_config_json(sb.path("ignored")));
    std::string cmd = "PAGC_OUT=" + sb.path("envdir") + " " + kCli + " train-stage1 --config " +
                      cfg + " --out " + sb.path("flagdir") + " --seed-grid 1x1 > " +
                      sb.path("log.txt") + " 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(fs::exists(sb.path("envdir") + "/checkpoints/stage1_seed0.ckpt"));
    CHECK_FALSE(fs::exists(sb.path("flagdir")));
}

TEST_CASE("cli check subcommand runs the invariant suite") {
    Sandbox sb("check");
    int code = run_cmd("check", sb.path("log.txt"));
    std::string log = pagc::read_text_file(sb.path("log.txt"));
    CHECK(code == 0);
    CHECK(log.find("[PASS] gradient-correctness") != std::string::npos);
    CHECK(log.find("[PASS] film-identity-at-init") != std::string::npos);
    CHECK(log.find("FAIL") == std::string::npos);
}
