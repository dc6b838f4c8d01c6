// pagc — perspectival-agent gridworld companion.
//
// Subcommands: train-stage1, run, probe, analyze, check. All outputs are
// deterministic in the config and seeds; see README.md for formats.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pagc/config.hpp"
#include "pagc/experiments.hpp"
#include "pagc/report.hpp"
#include "pagc/selfcheck.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonOpts {
    std::string config_path;
    std::string out_override;
    std::string seed_grid;
    int jobs = 1;
    bool force = false;
};

// out dir resolution: config < --out < PAGC_OUT
pagc::RunConfig resolve_config(const CommonOpts& opts) {
    pagc::RunConfig cfg = pagc::load_config(opts.config_path);
    if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
    if (const char* env = std::getenv("PAGC_OUT"); env && *env) cfg.out_dir = env;
    if (!opts.seed_grid.empty()) {
        auto x = opts.seed_grid.find('x');
        if (x == std::string::npos)
            throw pagc::ConfigError("--seed-grid expects S1xS2, e.g. 5x6");
        try {
            cfg.stage1_seeds = std::stoi(opts.seed_grid.substr(0, x));
            cfg.stage2_seeds = std::stoi(opts.seed_grid.substr(x + 1));
        } catch (const std::exception&) {
            throw pagc::ConfigError("--seed-grid expects S1xS2, e.g. 5x6");
        }
        if (cfg.stage1_seeds <= 0 || cfg.stage2_seeds <= 0)
            throw pagc::ConfigError("--seed-grid entries must be positive");
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_jobs_force = true) {
    cmd->add_option("--config", opts.config_path, "run config JSON")->required();
    cmd->add_option("--out", opts.out_override, "output directory (overrides config)");
    cmd->add_option("--seed-grid", opts.seed_grid, "seed grid as S1xS2 (default from config)");
    if (with_jobs_force) {
        cmd->add_option("--jobs", opts.jobs, "parallel runs")->check(CLI::PositiveNumber);
        cmd->add_flag("--force", opts.force, "overwrite existing outputs");
    }
}

int cmd_train_stage1(const CommonOpts& opts) {
    pagc::RunConfig cfg = resolve_config(opts);
    auto paths = pagc::train_stage1_all(cfg, cfg.stage1_seeds);
    for (const auto& p : paths) std::printf("wrote %s\n", p.c_str());
    std::printf("wrote %s/stage1_metrics.csv\n", cfg.out_dir.c_str());
    return kExitOk;
}

int cmd_run(const CommonOpts& opts, const std::string& condition) {
    pagc::RunConfig cfg = resolve_config(opts);
    std::vector<const pagc::Condition*> conds;
    if (condition == "all") {
        for (const auto& c : pagc::all_conditions()) conds.push_back(&c);
    } else {
        const pagc::Condition* c = pagc::find_condition(condition);
        if (!c) {
            std::fprintf(stderr, "unknown condition '%s'; valid names:", condition.c_str());
            for (const auto& k : pagc::all_conditions()) std::fprintf(stderr, " %s", k.key.c_str());
            std::fprintf(stderr, " all\n");
            return kExitUsage;
        }
        conds.push_back(c);
    }

    pagc::SeedGrid grid{cfg.stage1_seeds, cfg.stage2_seeds};
    for (const auto* c : conds) {
        std::string dir = pagc::run_dir(cfg.out_dir, *c);
        if (!opts.force && std::filesystem::exists(dir + "/manifest.json")) {
            std::fprintf(stderr, "refusing to overwrite %s (use --force)\n", dir.c_str());
            return kExitRuntime;
        }
    }
    int failures = 0;
    for (const auto* c : conds) {
        auto res = pagc::run_condition(*c, grid, cfg, opts.jobs);
        failures += res.failures;
        std::printf("%s: %d/%d runs ok\n", c->key.c_str(),
                    static_cast<int>(res.runs.size()) - res.failures,
                    static_cast<int>(res.runs.size()));
        for (const auto& r : res.runs)
            if (!r.ok)
                std::fprintf(stderr, "  failed %s s1=%d s2=%d: %s\n", c->key.c_str(), r.s1, r.s2,
                             r.error.c_str());
    }
    return failures ? kExitRuntime : kExitOk;
}

int cmd_probe(const CommonOpts& opts, const std::string& run_id) {
    pagc::RunConfig cfg = resolve_config(opts);
    auto c1 = run_id.find(':');
    auto c2 = run_id.rfind(':');
    if (c1 == std::string::npos || c2 == c1) {
        std::fprintf(stderr, "--run expects COND:S1:S2, e.g. mixed:0:1\n");
        return kExitUsage;
    }
    std::string cond = run_id.substr(0, c1);
    if (cond != "mixed" && cond != "Mixed") {
        std::fprintf(stderr, "probe assay is defined for mixed-history runs only (got '%s')\n",
                     cond.c_str());
        return kExitUsage;
    }
    int s1 = 0, s2 = 0;
    try {
        s1 = std::stoi(run_id.substr(c1 + 1, c2 - c1 - 1));
        s2 = std::stoi(run_id.substr(c2 + 1));
    } catch (const std::exception&) {
        std::fprintf(stderr, "--run expects COND:S1:S2, e.g. mixed:0:1\n");
        return kExitUsage;
    }
    pagc::ensure_dir(cfg.out_dir + "/probe");
    pagc::ProbeAssay assay = pagc::run_probe_assay(cfg, s1, s2);
    std::string path = pagc::probe_assay_path(cfg.out_dir, s1, s2);
    pagc::write_probe_assay(path, assay);
    std::printf("wrote %s (z_raw_identical=%s)\n", path.c_str(),
                assay.z_raw_identical ? "true" : "false");
    return kExitOk;
}

int cmd_analyze(const CommonOpts& opts) {
    pagc::RunConfig cfg = resolve_config(opts);
    pagc::AnalyzeResult res = pagc::analyze_out_dir(cfg);
    for (const auto& c : res.criteria)
        std::printf("%-18s %s\n", c.id.c_str(), c.status.c_str());
    if (!res.missing.empty())
        std::printf("missing runs: %d (see %s/analysis/acceptance.json)\n",
                    static_cast<int>(res.missing.size()), cfg.out_dir.c_str());
    std::printf("verdict: %s\n", res.verdict.c_str());
    return kExitOk;
}

int cmd_check() {
    auto results = pagc::run_selfchecks();
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all = all && r.pass;
    }
    return all ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"perspectival-agent gridworld simulator and experiment harness"};
    app.require_subcommand(1);

    CommonOpts train_opts, run_opts, probe_opts, analyze_opts;
    std::string condition, run_id;

    CLI::App* train = app.add_subcommand("train-stage1", "train the stage-1 backbone seeds");
    add_common(train, train_opts);

    CLI::App* run = app.add_subcommand("run", "run a stage-2 condition over the seed grid");
    add_common(run, run_opts);
    run->add_option("--condition", condition, "condition key or 'all'")->required();

    CLI::App* probe = app.add_subcommand("probe", "probe assay over a completed mixed run");
    add_common(probe, probe_opts, false);
    probe->add_option("--run", run_id, "run id as COND:S1:S2")->required();

    CLI::App* analyze = app.add_subcommand("analyze", "emit figure tables and verdicts");
    add_common(analyze, analyze_opts, false);

    app.add_subcommand("check", "run the fast invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) return cmd_train_stage1(train_opts);
        if (run->parsed()) return cmd_run(run_opts, condition);
        if (probe->parsed()) return cmd_probe(probe_opts, run_id);
        if (analyze->parsed()) return cmd_analyze(analyze_opts);
        return cmd_check();
    } catch (const pagc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}
