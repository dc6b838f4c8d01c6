#pragma once

#include <array>
#include <atomic>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pagc/checkpoint.hpp"
#include "pagc/config.hpp"
#include "pagc/io.hpp"
#include "pagc/training.hpp"

namespace pagc {

struct Condition {
    std::string name;   // canonical, used in seed derivation and tables
    std::string key;    // cli token and directory name
    std::array<int, 3> block_np{};
    AlphaMode alpha;
};

inline const std::vector<Condition>& all_conditions() {
    static const std::vector<Condition> conds = {
        {"Baseline", "baseline", {0, 0, 0}, AlphaMode::Adaptive()},
        {"Mixed", "mixed", {0, 4, 0}, AlphaMode::Adaptive()},
        {"Persistent", "persistent", {4, 4, 4}, AlphaMode::Adaptive()},
        {"AblationRigid", "ablation-rigid", {4, 4, 4}, AlphaMode::Fixed(0.05f)},
        {"AblationOpen", "ablation-open", {4, 4, 4}, AlphaMode::Fixed(0.80f)},
        {"AdaptiveNoPerturb", "adaptive-noperturb", {0, 0, 0}, AlphaMode::Adaptive()},
        {"AdaptivePerturb", "adaptive-perturb", {4, 4, 4}, AlphaMode::Adaptive()},
    };
    return conds;
}

inline const Condition* find_condition(const std::string& name_or_key) {
    for (const auto& c : all_conditions())
        if (c.name == name_or_key || c.key == name_or_key) return &c;
    return nullptr;
}

struct SeedGrid {
    int stage1 = 5;  // seeds 0..stage1-1
    int stage2 = 6;  // seeds 0..stage2-1
    int runs() const { return stage1 * stage2; }
};

// Run seeds are shared across conditions for a given grid cell: the
// arms of every comparison then start from an identical fresh module
// and random stream, and diverge only through the condition itself
// (perturbation schedule contents and alpha mode).
inline uint64_t derive_run_seed(const Condition&, int s1, int s2) {
    uint64_t h = fnv1a("run", 3);
    h = hash_combine(h, static_cast<uint64_t>(s1));
    h = hash_combine(h, static_cast<uint64_t>(s2));
    return h;
}

// Schedule randomness is keyed by (world, s1, s2, episode) only, never by
// condition, so arms with equal n_p see identical perturbation windows.
inline uint64_t derive_schedule_key(uint64_t world_seed, int s1, int s2) {
    return seed_from("schedule", world_seed, s1, s2);
}

// ---- probe set ----

struct Probe {
    AgentPos pos;
    int zone = 0;
    Observation obs{};
};

struct ProbeSet {
    std::vector<Probe> probes;  // 5 per zone, zone-major order
    uint64_t probe_seed = 0;
};

constexpr int kProbesPerZone = 5;

// 25 fixed observations, 5 distinct positions per zone, drawn without
// perturbation from a dedicated seeded stream.
inline ProbeSet build_probe_set(const GridWorld& world, uint64_t probe_seed) {
    ProbeSet set;
    set.probe_seed = probe_seed;
    RngStream rng(seed_from("probe", probe_seed));
    for (int z = 0; z < kNumZones; ++z) {
        std::vector<int> zone_cols;
        for (int c = 0; c < world.width; ++c)
            if (zone_of(c) == z) zone_cols.push_back(c);
        std::set<std::pair<int, int>> chosen;
        while (static_cast<int>(chosen.size()) < kProbesPerZone) {
            int col = zone_cols[rng.uniform_int(static_cast<uint32_t>(zone_cols.size()))];
            int row = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(world.height)));
            if (!chosen.insert({col, row}).second) continue;
            Probe p;
            p.pos = {col, row};
            p.zone = z;
            p.obs = observe(world, p.pos, false, rng);
            set.probes.push_back(p);
        }
    }
    return set;
}

// ---- late-block perspective snapshots ----

struct PerspectiveSnapshot {
    std::array<float, kGDim> g0{}, g2{};
    std::array<float, kZDim> gamma0{}, gamma2{};
};

// Means over the final 10 episodes of block 0 and block 2 (the whole
// block when it is shorter than 10, as in reduced test configs).
inline PerspectiveSnapshot extract_snapshot(const RunLog& log, int block_len = 50) {
    const int need = 3 * block_len;
    if (static_cast<int>(log.size()) < need)
        throw std::invalid_argument("extract_snapshot: log too short");
    const int w = std::min(10, block_len);
    PerspectiveSnapshot snap;
    auto window_mean = [&](int begin, std::array<float, kGDim>& g_out,
                           std::array<float, kZDim>& gamma_out) {
        std::array<double, kGDim> gs{};
        std::array<double, kZDim> cs{};
        for (int e = begin; e < begin + w; ++e) {
            for (int i = 0; i < kGDim; ++i) gs[i] += log[e].g_end[i];
            for (int i = 0; i < kZDim; ++i) cs[i] += log[e].gamma_mean[i];
        }
        for (int i = 0; i < kGDim; ++i) g_out[i] = static_cast<float>(gs[i] / w);
        for (int i = 0; i < kZDim; ++i) gamma_out[i] = static_cast<float>(cs[i] / w);
    };
    window_mean(block_len - w, snap.g0, snap.gamma0);
    window_mean(3 * block_len - w, snap.g2, snap.gamma2);
    return snap;
}

inline float block_mean_alpha(const RunLog& log, int block, int block_len = 50) {
    if (block < 0 || block > 2) throw std::out_of_range("block_mean_alpha: block must be 0..2");
    const int begin = block * block_len;
    if (static_cast<int>(log.size()) < begin + block_len)
        throw std::invalid_argument("block_mean_alpha: log too short");
    double acc = 0.0;
    for (int e = begin; e < begin + block_len; ++e) acc += log[e].mean_alpha;
    return static_cast<float>(acc / block_len);
}

// Frozen-encoder probe pass: z_raw is a pure function of the probe,
// z applies the run's trained salience gate under the given perspective.
inline void probe_encode(const AgentParams<float>& params, const Observation& probe,
                         const std::vector<float>& g, std::vector<float>& z_raw,
                         std::vector<float>& z) {
    std::vector<float> x(probe.begin(), probe.end());
    z_raw = encode_raw(params, x);
    std::vector<float> gamma, beta;
    film_gate(params, z_raw, g, z, gamma, beta);
}

// ---- batch orchestration ----

struct RunOutcome {
    int s1 = 0, s2 = 0;
    uint64_t run_seed = 0;
    std::string log_path;
    std::string ckpt_path;
    bool frozen_intact = false;
    bool ok = false;
    std::string error;
};

struct ConditionRunResult {
    Condition condition;
    std::vector<RunOutcome> runs;
    int failures = 0;
};

inline std::string stage1_ckpt_path(const std::string& out_dir, int s1) {
    return out_dir + "/checkpoints/stage1_seed" + std::to_string(s1) + ".ckpt";
}

inline std::string run_dir(const std::string& out_dir, const Condition& cond) {
    return out_dir + "/runs/" + cond.key;
}

inline std::string run_stem(int s1, int s2) {
    return "s1_" + std::to_string(s1) + "_s2_" + std::to_string(s2);
}

// Executes the full seed grid for one condition against existing
// stage-1 checkpoints. A missing checkpoint fails that run's row and the
// batch continues. Writes one RunLog CSV and one trained checkpoint per
// run plus a manifest; with jobs > 1, runs execute in a worker pool with
// per-run isolation and the manifest is written once at the end.
inline ConditionRunResult run_condition(const Condition& cond, const SeedGrid& grid,
                                        const RunConfig& cfg, int jobs = 1) {
    ConditionRunResult result;
    result.condition = cond;
    const std::string dir = run_dir(cfg.out_dir, cond);
    ensure_dir(dir);

    Stage2Config s2cfg = cfg.stage2;
    s2cfg.block_np = cond.block_np;

    std::vector<std::optional<AgentParams<float>>> bases(grid.stage1);
    std::vector<std::string> base_errs(grid.stage1);
    for (int s1 = 0; s1 < grid.stage1; ++s1) {
        try {
            AgentParams<float> p;
            load_checkpoint(stage1_ckpt_path(cfg.out_dir, s1), p.store);
            bases[s1] = std::move(p);
        } catch (const std::exception& e) {
            base_errs[s1] = e.what();
        }
    }

    result.runs.resize(grid.runs());
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int idx = next.fetch_add(1);
            if (idx >= grid.runs()) return;
            int s1 = idx / grid.stage2, s2 = idx % grid.stage2;
            RunOutcome& out = result.runs[idx];
            out.s1 = s1;
            out.s2 = s2;
            out.run_seed = derive_run_seed(cond, s1, s2);
            const std::string stem = dir + "/" + run_stem(s1, s2);
            out.log_path = stem + ".csv";
            out.ckpt_path = stem + ".ckpt";
            if (!bases[s1]) {
                out.error = base_errs[s1];
                continue;
            }
            try {
                Stage2Result res = stage2_run(s2cfg, *bases[s1], cfg.world_seed, out.run_seed,
                                              derive_schedule_key(cfg.world_seed, s1, s2),
                                              cond.alpha);
                write_text_file(out.log_path, runlog_to_csv(res.log));
                write_checkpoint(out.ckpt_path, res.params.store);
                out.frozen_intact = res.frozen_intact;
                out.ok = true;
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& r : result.runs)
        if (!r.ok) result.failures++;

    nlohmann::json manifest;
    manifest["condition"] = cond.name;
    manifest["key"] = cond.key;
    manifest["block_np"] = cond.block_np;
    manifest["alpha_mode"] =
        cond.alpha.adaptive ? "adaptive" : "fixed:" + csv_float(cond.alpha.fixed_value);
    manifest["world_seed"] = cfg.world_seed;
    manifest["runs"] = nlohmann::json::array();
    for (const auto& r : result.runs) {
        nlohmann::json jr;
        jr["s1"] = r.s1;
        jr["s2"] = r.s2;
        jr["run_seed"] = r.run_seed;
        jr["log"] = r.log_path;
        jr["checkpoint"] = r.ckpt_path;
        jr["frozen_intact"] = r.frozen_intact;
        jr["status"] = r.ok ? "ok" : "failed";
        if (!r.ok) jr["error"] = r.error;
        manifest["runs"].push_back(jr);
    }
    write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
    return result;
}

// The four matched arms of the plasticity ablation share seed grids and,
// through the schedule key, perturbation windows.
inline std::vector<ConditionRunResult> ablation_suite(const SeedGrid& grid, const RunConfig& cfg,
                                                      int jobs = 1) {
    std::vector<ConditionRunResult> results;
    for (const char* key : {"adaptive-perturb", "adaptive-noperturb", "ablation-rigid",
                            "ablation-open"})
        results.push_back(run_condition(*find_condition(key), grid, cfg, jobs));
    return results;
}

}  // namespace pagc
