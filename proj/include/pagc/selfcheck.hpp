#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pagc/agent.hpp"
#include "pagc/checkpoint.hpp"
#include "pagc/experiments.hpp"
#include "pagc/io.hpp"
#include "pagc/training.hpp"

namespace pagc {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace selfcheck {

template <class T>
void randomize_all(ParamStore<T>& ps, RngStream& rng, T scale) {
    for (auto& t : ps.tensors)
        for (auto& v : t.v) v = (T(2) * static_cast<T>(rng.uniform()) - T(1)) * scale;
}

// Gradient of the stage-2 step objective through the full pipeline,
// checked in double against central finite differences.
inline CheckResult gradients() {
    CheckResult r{"gradient-correctness", false, ""};
    double worst = 0.0;

    {
        RngStream rng(301);
        ParamStore<double> ps;
        MlpSpec m = add_mlp(ps, "m", 4, 6, 3, Act::Tanh);
        GruSpec g = add_gru(ps, "g", 4, 4);
        LayerNormSpec ln = add_layer_norm(ps, "n", 4);
        randomize_all(ps, rng, 0.6);
        std::vector<double> x(4), h(4);
        for (auto& v : x) v = rng.uniform() - 0.5;
        for (auto& v : h) v = rng.uniform() - 0.5;
        auto loss = [&]() {
            MlpCache<double> mc;
            GruCache<double> gc;
            LayerNormCache<double> lc;
            auto ym = mlp_forward(ps, m, x, mc);
            auto yn = layer_norm_forward(ps, ln, gru_forward(ps, g, x, h, gc), lc);
            double acc = 0.0;
            for (double v : ym) acc += v * v;
            for (double v : yn) acc += v * v;
            return acc;
        };
        MlpCache<double> mc;
        GruCache<double> gc;
        LayerNormCache<double> lc;
        auto ym = mlp_forward(ps, m, x, mc);
        auto yn = layer_norm_forward(ps, ln, gru_forward(ps, g, x, h, gc), lc);
        ps.zero_grads();
        std::vector<double> dym(ym.size()), dyn(yn.size()), dyg;
        for (size_t i = 0; i < ym.size(); ++i) dym[i] = 2.0 * ym[i];
        for (size_t i = 0; i < yn.size(); ++i) dyn[i] = 2.0 * yn[i];
        mlp_backward(ps, m, mc, dym, static_cast<std::vector<double>*>(nullptr));
        layer_norm_backward(ps, ln, lc, dyn, &dyg);
        gru_backward(ps, g, gc, dyg, static_cast<std::vector<double>*>(nullptr),
                     static_cast<std::vector<double>*>(nullptr));
        std::vector<int> idx(ps.tensors.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        worst = std::max(worst, grad_check<double>(ps, idx, loss).overall);
    }

    {
        RngStream rng(302);
        AgentParams<double> p;
        p.init(303);
        randomize_all(p.store, rng, 0.3);
        AgentState<double> base;
        for (auto& v : base.g) v = rng.uniform() - 0.5;
        for (auto& v : base.p_ema) v = rng.uniform() * 0.4;
        base.err_short = 0.04;
        base.err_long = 0.01;
        base.perturb_trace = 0.2;
        base.prev_prediction = std::vector<double>(kPatchDim, 0.3);
        base.prev_action = 1;
        std::vector<double> x(kPatchDim), target(kPatchDim);
        for (auto& v : x) v = rng.uniform();
        for (auto& v : target) v = rng.uniform();
        const int action = 2;
        auto forward = [&](StepTape<double>& tape) {
            AgentState<double> st = base;
            RngStream local(1);
            agent_step(p, st, x, true, StepMode{true, AlphaMode::Adaptive(0.03, 0.30)}, local,
                       tape, action);
        };
        auto loss = [&]() {
            StepTape<double> tape;
            forward(tape);
            double acc = mse(tape.predicted_next, target);
            for (int i = 0; i < kGDim; ++i) {
                double d = tape.g_new[i] - tape.g_prev[i];
                acc += 0.1 * d * d;
            }
            return acc;
        };
        StepTape<double> tape;
        forward(tape);
        p.store.zero_grads();
        std::vector<double> d_pred(kPatchDim), d_g(kGDim);
        for (int i = 0; i < kPatchDim; ++i)
            d_pred[i] = 2.0 / kPatchDim * (tape.predicted_next[i] - target[i]);
        for (int i = 0; i < kGDim; ++i) d_g[i] = 2.0 * 0.1 * (tape.g_new[i] - tape.g_prev[i]);
        agent_step_backward(p, tape, d_pred, d_g, {});
        std::vector<int> idx(p.store.tensors.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        worst = std::max(worst, grad_check<double>(p.store, idx, loss).overall);
    }

    std::ostringstream os;
    os << "max rel err " << worst;
    r.detail = os.str();
    r.pass = worst <= 1e-4;
    return r;
}

inline CheckResult film_identity() {
    CheckResult r{"film-identity-at-init", false, ""};
    AgentParams<float> p;
    p.init(711);
    RngStream rng(712);
    int checked = 0;
    bool ok = true;
    for (int i = 0; i < 1000; ++i) {
        std::vector<float> x(kPatchDim), g(kGDim), z, gamma, beta;
        for (auto& v : x) v = static_cast<float>(rng.normal());
        for (auto& v : g) v = static_cast<float>(rng.normal());
        auto z_raw = encode_raw(p, x);
        film_gate(p, z_raw, g, z, gamma, beta);
        if (z != z_raw) ok = false;
        ++checked;
    }
    r.pass = ok;
    r.detail = std::to_string(checked) + " observations, exact equality";
    return r;
}

inline CheckResult alpha_bounds() {
    CheckResult r{"alpha-bounds", false, ""};
    AgentParams<float> p;
    p.init(721);
    RngStream rng(722);
    randomize_all(p.store, rng, 1.0f);
    bool ok = true;
    for (int i = 0; i < 10000; ++i) {
        std::vector<float> z(kZDim), pp(kPDim), g(kGDim), e(kEDim);
        for (auto& v : z) v = static_cast<float>(rng.normal());
        for (auto& v : pp) v = static_cast<float>(rng.normal());
        for (auto& v : g) v = static_cast<float>(rng.normal() * 2.0);
        for (auto& v : e) v = static_cast<float>(rng.normal());
        float a = compute_alpha(p, z, pp, g, e, 0.03f, 0.30f);
        if (!(a >= 0.03f && a <= 0.30f)) ok = false;
    }
    // fixed overrides
    AgentState<float> st;
    StepTape<float> tape;
    RngStream arng(723);
    agent_step(p, st, std::vector<float>(kPatchDim, 0.2f), false,
               StepMode{true, AlphaMode::Fixed(0.05f)}, arng, tape);
    if (tape.alpha != 0.05f) ok = false;
    agent_step(p, st, std::vector<float>(kPatchDim, 0.2f), false,
               StepMode{true, AlphaMode::Fixed(0.80f)}, arng, tape);
    if (tape.alpha != 0.80f) ok = false;
    r.pass = ok;
    r.detail = "10000 random inputs plus fixed overrides";
    return r;
}

// Betweenness of the perspective update at every live training step of a
// short stage-2 run, plus alpha bounds on the same steps.
inline CheckResult perspective_convexity() {
    CheckResult r{"perspective-convexity", false, ""};
    Stage1Config s1;
    s1.total_steps = 480;
    Stage1Result stage1 = stage1_train(s1, 90, 0);

    Stage2Config cfg;
    cfg.block_len = 1;
    cfg.episodes = 3;
    cfg.block_np = {0, 4, 0};
    long long steps = 0, violations = 0;
    std::function<void(const StepTape<float>&)> hook = [&](const StepTape<float>& tape) {
        ++steps;
        for (int i = 0; i < kGDim; ++i) {
            float lo = std::min(tape.g_prev[i], tape.cand[i]);
            float hi = std::max(tape.g_prev[i], tape.cand[i]);
            if (tape.g_new[i] < lo || tape.g_new[i] > hi) ++violations;
        }
        if (tape.alpha < 0.03f || tape.alpha > 0.30f) ++violations;
    };
    stage2_run(cfg, stage1.params, 90, 91, 92, AlphaMode::Adaptive(), &hook);
    r.pass = violations == 0 && steps == 3 * 240;
    r.detail = std::to_string(steps) + " live steps, " + std::to_string(violations) +
               " violations";
    return r;
}

inline CheckResult ema_carry() {
    CheckResult r{"ema-carry", false, ""};
    AgentParams<float> p;
    p.init(731);
    AgentState<float> st;
    for (auto& v : st.g) v = 0.37f;
    auto g0 = st.g;
    StepTape<float> tape;
    RngStream rng(732);
    std::vector<float> x(kPatchDim);
    for (int t = 0; t < 240; ++t) {
        for (auto& v : x) v = static_cast<float>(rng.normal());
        agent_step(p, st, x, false, StepMode{true, AlphaMode::Fixed(0.0f)}, rng, tape);
    }
    r.pass = st.g == g0;
    r.detail = "g bit-identical after a zero-alpha episode";
    return r;
}

inline CheckResult checkpoint_roundtrip() {
    CheckResult r{"checkpoint-roundtrip", false, ""};
    AgentParams<float> p;
    p.init(741);
    auto tmp = std::filesystem::temp_directory_path() / "pagc_selfcheck";
    std::filesystem::create_directories(tmp);
    std::string p1 = (tmp / "a.ckpt").string();
    std::string p2 = (tmp / "b.ckpt").string();
    write_checkpoint(p1, p.store);
    AgentParams<float> q;
    load_checkpoint(p1, q.store);
    write_checkpoint(p2, q.store);
    r.pass = file_hash(p1) == file_hash(p2);
    r.detail = "save -> load -> save byte-identical";
    return r;
}

inline CheckResult determinism_micro() {
    CheckResult r{"determinism-micro", false, ""};
    Stage1Config s1;
    s1.total_steps = 480;
    Stage1Result a = stage1_train(s1, 7, 3);
    Stage1Result b = stage1_train(s1, 7, 3);
    bool same = a.params.store.tensors.size() == b.params.store.tensors.size();
    for (size_t i = 0; same && i < a.params.store.tensors.size(); ++i)
        same = a.params.store.tensors[i].v == b.params.store.tensors[i].v;

    Stage2Config cfg;
    cfg.block_len = 1;
    cfg.episodes = 3;
    cfg.block_np = {0, 4, 0};
    Stage2Result ra = stage2_run(cfg, a.params, 7, 8, 9, AlphaMode::Adaptive());
    Stage2Result rb = stage2_run(cfg, b.params, 7, 8, 9, AlphaMode::Adaptive());
    same = same && runlog_to_csv(ra.log) == runlog_to_csv(rb.log);
    r.pass = same;
    r.detail = "repeated short runs bit-identical";
    return r;
}

}  // namespace selfcheck

inline std::vector<CheckResult> run_selfchecks() {
    return {
        selfcheck::gradients(),        selfcheck::film_identity(),
        selfcheck::alpha_bounds(),     selfcheck::perspective_convexity(),
        selfcheck::ema_carry(),        selfcheck::checkpoint_roundtrip(),
        selfcheck::determinism_micro(),
    };
}

}  // namespace pagc
