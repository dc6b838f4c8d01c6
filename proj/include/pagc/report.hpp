#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pagc/analysis.hpp"
#include "pagc/checkpoint.hpp"
#include "pagc/config.hpp"
#include "pagc/experiments.hpp"
#include "pagc/io.hpp"

namespace pagc {

inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// ---- stage-1 driver ----

// Trains one checkpoint per stage-1 seed and a combined metrics CSV.
inline std::vector<std::string> train_stage1_all(const RunConfig& cfg, int n_seeds) {
    ensure_dir(cfg.out_dir + "/checkpoints");
    std::vector<std::string> paths;
    std::string metrics = stage1_metrics_csv_header() + "\n";
    for (int s1 = 0; s1 < n_seeds; ++s1) {
        Stage1Result res = stage1_train(cfg.stage1, cfg.world_seed, static_cast<uint64_t>(s1));
        std::string path = stage1_ckpt_path(cfg.out_dir, s1);
        write_checkpoint(path, res.params.store);
        append_stage1_metrics(metrics, s1, res.metrics);
        paths.push_back(path);
    }
    write_text_file(cfg.out_dir + "/stage1_metrics.csv", metrics);
    return paths;
}

// ---- probe assay ----

struct ProbeAssay {
    int s1 = 0, s2 = 0;
    std::string run_id;
    PerspectiveSnapshot snap;
    ProbeSet probes;
    std::vector<std::vector<float>> z_raw, z_g0, z_g2, z_null;
    std::vector<float> gate_gamma_g0, gate_gamma_g2, gate_gamma_null;
    std::vector<double> diff_g2_null;
    bool z_raw_identical = false;
};

// Probe pass over one completed mixed-history run: frozen encoder, the
// run's trained gate, perspectives from the late-block snapshots plus
// the zero reference.
inline ProbeAssay run_probe_assay(const RunConfig& cfg, int s1, int s2) {
    const Condition& mixed = *find_condition("mixed");
    const std::string stem = run_dir(cfg.out_dir, mixed) + "/" + run_stem(s1, s2);
    RunLog log = runlog_from_csv(read_text_file(stem + ".csv"));
    AgentParams<float> params;
    load_checkpoint(stem + ".ckpt", params.store);

    ProbeAssay assay;
    assay.s1 = s1;
    assay.s2 = s2;
    assay.run_id = mixed.key + ":" + std::to_string(s1) + ":" + std::to_string(s2);
    assay.snap = extract_snapshot(log, cfg.stage2.block_len);

    GridWorld world = new_world(cfg.stage2.sigma_left, cfg.stage2.sigma_right, cfg.world_seed);
    assay.probes = build_probe_set(world, cfg.probe_seed);

    std::vector<float> g0(assay.snap.g0.begin(), assay.snap.g0.end());
    std::vector<float> g2(assay.snap.g2.begin(), assay.snap.g2.end());
    std::vector<float> gnull(kGDim, 0.0f);

    assay.z_raw_identical = true;
    for (const Probe& probe : assay.probes.probes) {
        std::vector<float> zr0, zr2, zrn, z0, z2, zn;
        probe_encode(params, probe.obs, g0, zr0, z0);
        probe_encode(params, probe.obs, g2, zr2, z2);
        probe_encode(params, probe.obs, gnull, zrn, zn);
        if (zr0 != zr2 || zr0 != zrn) assay.z_raw_identical = false;
        assay.z_raw.push_back(zr0);
        assay.z_g0.push_back(z0);
        assay.z_g2.push_back(z2);
        assay.z_null.push_back(zn);
    }
    assay.diff_g2_null = per_dim_diff(assay.z_g2, assay.z_null);

    auto gate_gamma = [&](const std::vector<float>& g) {
        std::vector<float> gb;
        affine_forward(params.store[params.film_w], params.store[params.film_b], g, gb);
        return std::vector<float>(gb.begin(), gb.begin() + kZDim);
    };
    assay.gate_gamma_g0 = gate_gamma(g0);
    assay.gate_gamma_g2 = gate_gamma(g2);
    assay.gate_gamma_null = gate_gamma(gnull);
    return assay;
}

inline std::string probe_assay_path(const std::string& out_dir, int s1, int s2) {
    return out_dir + "/probe/mixed_" + run_stem(s1, s2) + ".json";
}

inline void write_probe_assay(const std::string& path, const ProbeAssay& a) {
    nlohmann::json j;
    j["run_id"] = a.run_id;
    j["s1"] = a.s1;
    j["s2"] = a.s2;
    j["z_raw_identical"] = a.z_raw_identical;
    j["g0"] = std::vector<float>(a.snap.g0.begin(), a.snap.g0.end());
    j["g2"] = std::vector<float>(a.snap.g2.begin(), a.snap.g2.end());
    j["gamma_mean_block0"] = std::vector<float>(a.snap.gamma0.begin(), a.snap.gamma0.end());
    j["gamma_mean_block2"] = std::vector<float>(a.snap.gamma2.begin(), a.snap.gamma2.end());
    j["gate_gamma_g0"] = a.gate_gamma_g0;
    j["gate_gamma_g2"] = a.gate_gamma_g2;
    j["gate_gamma_null"] = a.gate_gamma_null;
    j["per_dim_diff_g2_null"] = a.diff_g2_null;
    j["probes"] = nlohmann::json::array();
    for (size_t i = 0; i < a.probes.probes.size(); ++i) {
        const Probe& p = a.probes.probes[i];
        nlohmann::json pj;
        pj["col"] = p.pos.col;
        pj["row"] = p.pos.row;
        pj["zone"] = p.zone;
        pj["obs"] = std::vector<float>(p.obs.begin(), p.obs.end());
        pj["z_raw"] = a.z_raw[i];
        pj["z_g0"] = a.z_g0[i];
        pj["z_g2"] = a.z_g2[i];
        pj["z_null"] = a.z_null[i];
        j["probes"].push_back(pj);
    }
    write_text_file(path, j.dump(2) + "\n");
}

// ---- analyze ----

struct CriterionVerdict {
    std::string id;
    std::string status;  // pass | fail | incomplete
    nlohmann::json measured;
};

struct AnalyzeResult {
    std::vector<CriterionVerdict> criteria;
    std::vector<std::string> missing;
    std::string verdict;  // pass | fail | incomplete
};

namespace detail {

struct LoadedCondition {
    std::map<std::pair<int, int>, RunLog> logs;
    bool all_frozen_intact = true;
    bool complete = false;
};

inline LoadedCondition load_condition_logs(const RunConfig& cfg, const Condition& cond,
                                           const SeedGrid& grid,
                                           std::vector<std::string>& missing) {
    LoadedCondition out;
    const std::string dir = run_dir(cfg.out_dir, cond);
    int found = 0;
    for (int s1 = 0; s1 < grid.stage1; ++s1) {
        for (int s2 = 0; s2 < grid.stage2; ++s2) {
            const std::string path = dir + "/" + run_stem(s1, s2) + ".csv";
            if (!std::filesystem::exists(path)) {
                missing.push_back(cond.key + "/" + run_stem(s1, s2));
                continue;
            }
            out.logs[{s1, s2}] = runlog_from_csv(read_text_file(path));
            ++found;
        }
    }
    const std::string manifest_path = dir + "/manifest.json";
    if (std::filesystem::exists(manifest_path)) {
        auto j = nlohmann::json::parse(read_text_file(manifest_path));
        for (const auto& r : j.at("runs"))
            if (r.at("status") == "ok" && !r.at("frozen_intact").get<bool>())
                out.all_frozen_intact = false;
    }
    out.complete = found == grid.runs();
    return out;
}

inline std::vector<double> median_trajectory(const std::map<std::pair<int, int>, RunLog>& logs,
                                             double (*get)(const EpisodeRecord&)) {
    auto summaries = episode_trajectory(logs, [&](const EpisodeRecord& r) { return get(r); });
    std::vector<double> med;
    med.reserve(summaries.size());
    for (const auto& s : summaries) med.push_back(s.grand_median);
    return med;
}

}  // namespace detail

// Figure-shape thresholds, fixed here.
constexpr double kFig3BaselineFloor = -0.01;     // baseline residue may not be a rise beyond this
constexpr double kFig3MixedMargin = 0.02;        // mixed must exceed baseline by at least this
constexpr double kRigidGrowthRatio = 1.5;        // final vs one-third point
constexpr double kOpenFlatFraction = 0.25;       // of the adaptive total range
constexpr double kAdaptivePlateauRatio = 0.3;    // late slope vs early slope
constexpr double kAdaptiveFinalGap = 0.25;       // relative gap between adaptive arms
constexpr int kLateAlphaWindow = 30;             // final episodes for the late-alpha comparison

// Reads every run the out_dir holds, emits the six figure tables and the
// acceptance verdict JSON. Incomplete data yields partial tables and an
// "incomplete" verdict with the missing runs listed.
inline AnalyzeResult analyze_out_dir(const RunConfig& cfg) {
    SeedGrid grid{cfg.stage1_seeds, cfg.stage2_seeds};
    AnalyzeResult result;
    const std::string adir = cfg.out_dir + "/analysis";
    ensure_dir(adir);

    std::map<std::string, detail::LoadedCondition> loaded;
    for (const auto& cond : all_conditions())
        loaded[cond.name] = detail::load_condition_logs(cfg, cond, grid, result.missing);

    auto have = [&](std::initializer_list<const char*> names) {
        for (const char* n : names)
            if (!loaded[n].complete) return false;
        return true;
    };

    // --- plasticity bounds (criterion: every logged alpha in range) ---
    {
        CriterionVerdict v;
        v.id = "alpha_bounds";
        bool any = false, ok = true;
        int checked = 0;
        for (const auto& cond : all_conditions()) {
            for (const auto& [key, log] : loaded[cond.name].logs) {
                any = true;
                for (const auto& rec : log) {
                    ++checked;
                    if (cond.alpha.adaptive) {
                        if (rec.mean_alpha < cfg.stage2.alpha_lo ||
                            rec.mean_alpha > cfg.stage2.alpha_hi)
                            ok = false;
                    } else if (rec.mean_alpha != cond.alpha.fixed_value) {
                        ok = false;
                    }
                }
            }
        }
        v.measured["episodes_checked"] = checked;
        v.status = !any ? "incomplete" : (ok ? "pass" : "fail");
        result.criteria.push_back(v);
    }

    // --- frozen backbone flags from manifests ---
    {
        CriterionVerdict v;
        v.id = "frozen_backbone";
        bool any = false, ok = true;
        for (auto& [name, lc] : loaded) {
            if (lc.logs.empty()) continue;
            any = true;
            if (!lc.all_frozen_intact) ok = false;
        }
        v.status = !any ? "incomplete" : (ok ? "pass" : "fail");
        result.criteria.push_back(v);
    }

    // --- residue table + ordering ---
    {
        CriterionVerdict v;
        v.id = "fig3_ordering";
        std::map<std::string, std::map<std::pair<int, int>, RunLog>> by_cond;
        for (const char* n : {"Baseline", "Mixed", "Persistent"})
            if (!loaded[n].logs.empty()) by_cond[n] = loaded[n].logs;
        if (!by_cond.empty()) {
            auto rows = plasticity_residue(by_cond, cfg.stage2.block_len);
            std::string csv =
                "condition,block0_median,block0_p25,block0_p75,block2_median,block2_p25,"
                "block2_p75,delta_median,delta_p25,delta_p75\n";
            std::map<std::string, double> delta;
            for (const auto& r : rows) {
                csv += r.condition + "," + csv_double(r.block0.grand_median) + "," +
                       csv_double(r.block0.p25) + "," + csv_double(r.block0.p75) + "," +
                       csv_double(r.block2.grand_median) + "," + csv_double(r.block2.p25) + "," +
                       csv_double(r.block2.p75) + "," + csv_double(r.delta.grand_median) + "," +
                       csv_double(r.delta.p25) + "," + csv_double(r.delta.p75) + "\n";
                delta[r.condition] = r.delta.grand_median;
                v.measured["delta_" + r.condition] = r.delta.grand_median;
                v.measured["block0_" + r.condition] = r.block0.grand_median;
                v.measured["block2_" + r.condition] = r.block2.grand_median;
            }
            write_text_file(adir + "/fig3_residue.csv", csv);
            if (have({"Baseline", "Mixed", "Persistent"})) {
                bool ok = delta["Mixed"] > delta["Persistent"] &&
                          delta["Persistent"] > delta["Baseline"] &&
                          delta["Baseline"] >= kFig3BaselineFloor &&
                          delta["Mixed"] - delta["Baseline"] >= kFig3MixedMargin;
                v.status = ok ? "pass" : "fail";
            } else {
                v.status = "incomplete";
            }
        } else {
            v.status = "incomplete";
        }
        result.criteria.push_back(v);
    }

    // --- trajectory tables + regime shapes ---
    const std::vector<std::string> fig5_conds = {"AdaptivePerturb", "AdaptiveNoPerturb",
                                                 "AblationRigid", "AblationOpen"};
    std::map<std::string, std::vector<double>> gnorm_med, alpha_med;
    for (const auto& name : fig5_conds) {
        if (loaded[name].logs.empty()) continue;
        gnorm_med[name] = detail::median_trajectory(
            loaded[name].logs, +[](const EpisodeRecord& r) { return static_cast<double>(r.g_norm); });
        alpha_med[name] = detail::median_trajectory(
            loaded[name].logs,
            +[](const EpisodeRecord& r) { return static_cast<double>(r.mean_alpha); });
    }
    {
        // fig5a: episode-wise alpha for the two adaptive arms
        std::string csv = "episode";
        std::vector<std::string> arms;
        for (const char* n : {"AdaptivePerturb", "AdaptiveNoPerturb"})
            if (alpha_med.count(n)) arms.push_back(n);
        for (const auto& n : arms) csv += "," + n + "_median," + n + "_p25," + n + "_p75";
        csv += "\n";
        if (!arms.empty()) {
            std::map<std::string, std::vector<HierarchicalSummary>> sums;
            for (const auto& n : arms)
                sums[n] = episode_trajectory(loaded[n].logs, [](const EpisodeRecord& r) {
                    return static_cast<double>(r.mean_alpha);
                });
            size_t episodes = sums[arms[0]].size();
            for (size_t e = 0; e < episodes; ++e) {
                csv += std::to_string(e);
                for (const auto& n : arms)
                    csv += "," + csv_double(sums[n][e].grand_median) + "," +
                           csv_double(sums[n][e].p25) + "," + csv_double(sums[n][e].p75);
                csv += "\n";
            }
            write_text_file(adir + "/fig5a_alpha.csv", csv);
        }
    }
    {
        // fig5b: episode-wise perspective magnitude for all four regimes
        std::vector<std::string> arms;
        for (const auto& n : fig5_conds)
            if (gnorm_med.count(n)) arms.push_back(n);
        if (!arms.empty()) {
            std::map<std::string, std::vector<HierarchicalSummary>> sums;
            for (const auto& n : arms)
                sums[n] = episode_trajectory(loaded[n].logs, [](const EpisodeRecord& r) {
                    return static_cast<double>(r.g_norm);
                });
            std::string csv = "episode";
            for (const auto& n : arms) csv += "," + n + "_median," + n + "_p25," + n + "_p75";
            csv += "\n";
            size_t episodes = sums[arms[0]].size();
            for (size_t e = 0; e < episodes; ++e) {
                csv += std::to_string(e);
                for (const auto& n : arms)
                    csv += "," + csv_double(sums[n][e].grand_median) + "," +
                           csv_double(sums[n][e].p25) + "," + csv_double(sums[n][e].p75);
                csv += "\n";
            }
            write_text_file(adir + "/fig5b_gnorm.csv", csv);
        }
    }
    {
        CriterionVerdict v;
        v.id = "fig5b_shapes";
        if (have({"AdaptivePerturb", "AdaptiveNoPerturb", "AblationRigid", "AblationOpen"})) {
            const auto& rigid = gnorm_med["AblationRigid"];
            const auto& open = gnorm_med["AblationOpen"];
            const auto& ap = gnorm_med["AdaptivePerturb"];
            const auto& anp = gnorm_med["AdaptiveNoPerturb"];
            const size_t E = rigid.size();
            const size_t third = E / 3;

            double rigid_late_slope = least_squares_slope(rigid, 2 * third, E);
            bool rigid_ok = rigid_late_slope > 0.0 &&
                            rigid.back() > kRigidGrowthRatio * rigid[third - 1];
            v.measured["rigid_late_slope"] = rigid_late_slope;
            v.measured["rigid_final"] = rigid.back();
            v.measured["rigid_one_third"] = rigid[third - 1];

            auto range_of = [](const std::vector<double>& y, size_t b, size_t e) {
                double lo = y[b], hi = y[b];
                for (size_t i = b; i < e; ++i) {
                    lo = std::min(lo, y[i]);
                    hi = std::max(hi, y[i]);
                }
                return hi - lo;
            };
            double adaptive_total_range = range_of(ap, 0, E);
            double open_late_range = range_of(open, third, E);
            bool open_ok = open_late_range < kOpenFlatFraction * adaptive_total_range;
            v.measured["open_late_range"] = open_late_range;
            v.measured["adaptive_total_range"] = adaptive_total_range;

            auto plateau_ok = [&](const std::vector<double>& y, const char* tag) {
                double s1 = least_squares_slope(y, 0, third);
                double s3 = least_squares_slope(y, 2 * third, E);
                v.measured[std::string(tag) + "_early_slope"] = s1;
                v.measured[std::string(tag) + "_late_slope"] = s3;
                return s1 > 0.0 && s3 > 0.0 && s3 < kAdaptivePlateauRatio * s1;
            };
            bool adaptive_ok = plateau_ok(ap, "adaptive_perturb") &&
                               plateau_ok(anp, "adaptive_noperturb");
            double gap = std::abs(ap.back() - anp.back());
            double gap_rel = gap / std::max(ap.back(), anp.back());
            bool gap_ok = gap_rel <= kAdaptiveFinalGap;
            v.measured["adaptive_final_gap_rel"] = gap_rel;

            v.status = (rigid_ok && open_ok && adaptive_ok && gap_ok) ? "pass" : "fail";
            v.measured["rigid_ok"] = rigid_ok;
            v.measured["open_ok"] = open_ok;
            v.measured["adaptive_ok"] = adaptive_ok;
            v.measured["gap_ok"] = gap_ok;
        } else {
            v.status = "incomplete";
        }
        result.criteria.push_back(v);
    }
    {
        CriterionVerdict v;
        v.id = "fig5a_late_alpha";
        if (have({"AdaptivePerturb", "AdaptiveNoPerturb"})) {
            auto late_mean = [&](const std::map<std::pair<int, int>, RunLog>& logs) {
                std::map<std::pair<int, int>, double> vals;
                for (const auto& [key, log] : logs) {
                    double acc = 0.0;
                    for (size_t e = log.size() - kLateAlphaWindow; e < log.size(); ++e)
                        acc += log[e].mean_alpha;
                    vals[key] = acc / kLateAlphaWindow;
                }
                return hierarchical_summary(vals).grand_median;
            };
            double perturbed = late_mean(loaded["AdaptivePerturb"].logs);
            double baseline = late_mean(loaded["AdaptiveNoPerturb"].logs);
            v.measured["adaptive_perturb_late_alpha"] = perturbed;
            v.measured["adaptive_noperturb_late_alpha"] = baseline;
            v.status = perturbed < baseline ? "pass" : "fail";
        } else {
            v.status = "incomplete";
        }
        result.criteria.push_back(v);
    }

    // --- probe assay tables + structural checks ---
    {
        CriterionVerdict v;
        v.id = "probe_assay";
        std::vector<nlohmann::json> assays;
        const std::string pdir = cfg.out_dir + "/probe";
        if (std::filesystem::exists(pdir)) {
            std::vector<std::string> files;
            for (const auto& ent : std::filesystem::directory_iterator(pdir))
                if (ent.path().extension() == ".json") files.push_back(ent.path().string());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) assays.push_back(nlohmann::json::parse(read_text_file(f)));
        }
        if (!assays.empty()) {
            bool ok = true;
            double min_mean_shift = 1e300;
            std::string pca_csv = "run_id,set,index,x,y\n";
            std::string diff_csv = "run_id,dim,diff\n";
            std::string gamma_csv = "run_id,dim,gamma_block0,gamma_block2\n";
            std::vector<std::vector<double>> diff_rows;
            std::vector<std::vector<double>> g0_rows, g2_rows;
            for (const auto& a : assays) {
                if (!a.at("z_raw_identical").get<bool>()) ok = false;
                double shift = 0.0;
                std::vector<std::vector<double>> zg2, znull;
                for (const auto& pj : a.at("probes")) {
                    auto z2 = pj.at("z_g2").get<std::vector<double>>();
                    auto zn = pj.at("z_null").get<std::vector<double>>();
                    double d2 = 0.0;
                    for (size_t i = 0; i < z2.size(); ++i)
                        d2 += (z2[i] - zn[i]) * (z2[i] - zn[i]);
                    shift += std::sqrt(d2);
                    zg2.push_back(z2);
                    znull.push_back(zn);
                }
                shift /= static_cast<double>(a.at("probes").size());
                min_mean_shift = std::min(min_mean_shift, shift);

                const std::string rid = a.at("run_id").get<std::string>();
                PcaProjection pca = pca_2d(zg2, znull);
                for (size_t i = 0; i < pca.proj_a.size(); ++i)
                    pca_csv += rid + ",g2," + std::to_string(i) + "," +
                               csv_double(pca.proj_a[i][0]) + "," + csv_double(pca.proj_a[i][1]) +
                               "\n";
                for (size_t i = 0; i < pca.proj_b.size(); ++i)
                    pca_csv += rid + ",null," + std::to_string(i) + "," +
                               csv_double(pca.proj_b[i][0]) + "," + csv_double(pca.proj_b[i][1]) +
                               "\n";
                pca_csv += rid + ",centroid_g2,0," + csv_double(pca.centroid_a[0]) + "," +
                           csv_double(pca.centroid_a[1]) + "\n";
                pca_csv += rid + ",centroid_null,0," + csv_double(pca.centroid_b[0]) + "," +
                           csv_double(pca.centroid_b[1]) + "\n";
                pca_csv += rid + ",cov_g2,0," + csv_double(pca.cov_a[0][0]) + "," +
                           csv_double(pca.cov_a[0][1]) + "\n";
                pca_csv += rid + ",cov_g2,1," + csv_double(pca.cov_a[1][0]) + "," +
                           csv_double(pca.cov_a[1][1]) + "\n";
                pca_csv += rid + ",cov_null,0," + csv_double(pca.cov_b[0][0]) + "," +
                           csv_double(pca.cov_b[0][1]) + "\n";
                pca_csv += rid + ",cov_null,1," + csv_double(pca.cov_b[1][0]) + "," +
                           csv_double(pca.cov_b[1][1]) + "\n";

                auto diff = a.at("per_dim_diff_g2_null").get<std::vector<double>>();
                diff_rows.push_back(diff);
                for (size_t i = 0; i < diff.size(); ++i)
                    diff_csv += rid + "," + std::to_string(i) + "," + csv_double(diff[i]) + "\n";

                auto gm0 = a.at("gamma_mean_block0").get<std::vector<double>>();
                auto gm2 = a.at("gamma_mean_block2").get<std::vector<double>>();
                g0_rows.push_back(gm0);
                g2_rows.push_back(gm2);
                for (size_t i = 0; i < gm0.size(); ++i)
                    gamma_csv += rid + "," + std::to_string(i) + "," + csv_double(gm0[i]) + "," +
                                 csv_double(gm2[i]) + "\n";
            }
            // seed-grid median rows
            auto median_rows = [](const std::vector<std::vector<double>>& rows) {
                std::vector<double> out;
                if (rows.empty()) return out;
                for (size_t i = 0; i < rows[0].size(); ++i) {
                    std::vector<double> col;
                    for (const auto& r : rows) col.push_back(r[i]);
                    out.push_back(median_of(col));
                }
                return out;
            };
            auto dmed = median_rows(diff_rows);
            for (size_t i = 0; i < dmed.size(); ++i)
                diff_csv += "median," + std::to_string(i) + "," + csv_double(dmed[i]) + "\n";
            auto g0med = median_rows(g0_rows), g2med = median_rows(g2_rows);
            for (size_t i = 0; i < g0med.size(); ++i)
                gamma_csv += "median," + std::to_string(i) + "," + csv_double(g0med[i]) + "," +
                             csv_double(g2med[i]) + "\n";

            write_text_file(adir + "/fig4a_pca.csv", pca_csv);
            write_text_file(adir + "/fig4b_diff.csv", diff_csv);
            write_text_file(adir + "/fig4c_gamma.csv", gamma_csv);

            v.measured["assays"] = assays.size();
            v.measured["min_mean_shift"] = min_mean_shift;
            v.status = (ok && min_mean_shift > 0.0) ? "pass" : "fail";
        } else {
            v.status = "incomplete";
        }
        result.criteria.push_back(v);
    }

    bool any_fail = false, any_incomplete = false;
    for (const auto& c : result.criteria) {
        if (c.status == "fail") any_fail = true;
        if (c.status == "incomplete") any_incomplete = true;
    }
    result.verdict = any_fail ? "fail" : (any_incomplete ? "incomplete" : "pass");

    nlohmann::json j;
    j["verdict"] = result.verdict;
    j["missing_runs"] = result.missing;
    j["criteria"] = nlohmann::json::array();
    for (const auto& c : result.criteria) {
        nlohmann::json cj;
        cj["id"] = c.id;
        cj["status"] = c.status;
        cj["measured"] = c.measured;
        j["criteria"].push_back(cj);
    }
    write_text_file(adir + "/acceptance.json", j.dump(2) + "\n");
    return result;
}

}  // namespace pagc
