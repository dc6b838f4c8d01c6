#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pagc/gridworld.hpp"
#include "pagc/nn.hpp"
#include "pagc/rng.hpp"

namespace pagc {

constexpr int kZDim = 16;   // perceptual latent
constexpr int kPDim = 8;    // encoded proprioceptive trace
constexpr int kGDim = 12;   // perspective latent
constexpr int kSDim = 16;   // policy state
constexpr int kEDim = 6;    // error features
constexpr int kMlpHidden = 64;
constexpr int kAlphaHidden = 32;

constexpr float kErrShortDecay = 0.9f;
constexpr float kErrLongDecay = 0.99f;
constexpr float kPerturbTraceDecay = 0.9f;
constexpr float kActionTraceDecay = 0.8f;

// All parameter tensors of the agent, grouped into eight named modules:
// encoder, film, proprio, gru, alpha_net, state_head, policy, decoder.
// The layer norm applied to the GRU candidate lives in the gru module.
template <class T>
struct AgentParams {
    ParamStore<T> store;
    MlpSpec encoder;    // 8 -> 16, tanh output
    int film_w = -1;    // 12 -> 32 affine emitting (gamma, beta), zero-initialized
    int film_b = -1;
    MlpSpec proprio;    // 5 -> 8, tanh output
    GruSpec gru;        // input 24, hidden 12
    LayerNormSpec gru_ln;
    MlpSpec alpha_net;  // 42 -> 1, hidden 32
    MlpSpec state_head; // 36 -> 16, tanh output
    int policy_w = -1;  // 16 -> 5 affine
    int policy_b = -1;
    MlpSpec decoder;    // 17 -> 8, linear output

    AgentParams() {
        encoder = add_mlp(store, "encoder", kPatchDim, kMlpHidden, kZDim, Act::Tanh);
        film_w = store.add("film.w", {2 * kZDim, kGDim});
        film_b = store.add("film.b", {2 * kZDim});
        proprio = add_mlp(store, "proprio", kNumActions, kMlpHidden, kPDim, Act::Tanh);
        gru = add_gru(store, "gru", kZDim + kPDim, kGDim);
        gru_ln = add_layer_norm(store, "gru", kGDim);
        alpha_net = add_mlp(store, "alpha_net", kZDim + kPDim + kGDim + kEDim, kAlphaHidden, 1,
                            Act::Linear);
        state_head = add_mlp(store, "state_head", kZDim + kPDim + kGDim, kMlpHidden, kSDim,
                             Act::Tanh);
        policy_w = store.add("policy.w", {kNumActions, kSDim});
        policy_b = store.add("policy.b", {kNumActions});
        decoder = add_mlp(store, "decoder", kGDim + kNumActions, kMlpHidden, kPatchDim,
                          Act::Linear);
    }

    // Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
    // The FiLM map is fully zero so gating starts as identity; layer-norm
    // gain starts at one. Draw order is the fixed tensor order.
    void init(uint64_t seed) { init_modules(seed, module_names()); }

    // Same scheme restricted to a subset of modules. The draw stream only
    // advances for tensors it fills, so the result is deterministic in
    // (seed, subset).
    void init_modules(uint64_t seed, const std::set<std::string>& modules) {
        RngStream rng(seed_from("init", seed));
        for (auto& t : store.tensors) {
            if (!modules.count(module_of(t.name))) continue;
            if (module_of(t.name) == "film") {
                std::fill(t.v.begin(), t.v.end(), T(0));
            } else if (t.name == "gru.ln_gain") {
                std::fill(t.v.begin(), t.v.end(), T(1));
            } else if (t.shape.size() == 2) {
                T bound = T(1) / std::sqrt(T(t.shape[1]));
                for (auto& v : t.v) v = (T(2) * static_cast<T>(rng.uniform()) - T(1)) * bound;
            } else {
                std::fill(t.v.begin(), t.v.end(), T(0));
            }
        }
    }

    static std::string module_of(const std::string& tensor_name) {
        return tensor_name.substr(0, tensor_name.find('.'));
    }

    static const std::set<std::string>& module_names() {
        static const std::set<std::string> names = {"encoder", "film", "proprio",  "gru",
                                                    "alpha_net", "state_head", "policy", "decoder"};
        return names;
    }

    void set_trainable_modules(const std::set<std::string>& modules) {
        for (auto& t : store.tensors) t.trainable = modules.count(module_of(t.name)) > 0;
    }
};

// Per-timestep carried state. g, the action trace, and the error EMAs
// persist across episode boundaries within a run; the prediction chain
// breaks at each episode reset (prev_prediction cleared by the runner).
template <class T>
struct AgentState {
    std::vector<T> g = std::vector<T>(kGDim, T(0));
    std::vector<T> p_ema = std::vector<T>(kNumActions, T(0));
    T err_short = T(0);
    T err_long = T(0);
    T perturb_trace = T(0);
    std::optional<std::vector<T>> prev_prediction;
    int prev_action = -1;  // -1: none yet
};

struct AlphaMode {
    bool adaptive = true;
    float fixed_value = 0.0f;
    float lo = 0.03f;
    float hi = 0.30f;

    static AlphaMode Adaptive(float lo = 0.03f, float hi = 0.30f) { return {true, 0.0f, lo, hi}; }
    static AlphaMode Fixed(float v) { return {false, v, 0.0f, 0.0f}; }
};

struct StepMode {
    bool film_active = true;
    AlphaMode alpha = AlphaMode::Adaptive();
};

// Everything one forward step produces plus the caches its backward
// pass needs.
template <class T>
struct StepTape {
    // outputs
    std::vector<T> z_raw, z, gamma, beta;   // 16 each
    std::vector<T> p;                       // 8
    std::vector<T> e;                       // 6
    T alpha = T(0);
    std::vector<T> g_prev, cand, g_new;     // 12 each
    std::vector<T> s;                       // 16
    std::vector<T> logits, probs;           // 5 each
    int action = 0;
    std::vector<T> predicted_next;          // 8
    T cur_err = T(0);                       // realized error of the previous prediction
    bool perturbed = false;

    // caches
    MlpCache<T> enc_c, prop_c, alpha_c, state_c, dec_c;
    GruCache<T> gru_c;
    LayerNormCache<T> ln_c;
    std::vector<T> alpha_in, state_in, dec_in;
    T alpha_sig = T(0);
    StepMode mode;
};

template <class T>
T mse(const std::vector<T>& a, const std::vector<T>& b) {
    T acc = T(0);
    for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / T(a.size());
}

template <class T>
std::vector<T> to_vec(const Observation& o) {
    return std::vector<T>(o.begin(), o.end());
}

// ---- the individual pipeline stages ----

template <class T>
std::vector<T> encode_raw(const AgentParams<T>& params, const std::vector<T>& x) {
    MlpCache<T> c;
    return mlp_forward(params.store, params.encoder, x, c);
}

// z = (1 + gamma) . z_raw + beta with (gamma, beta) = Linear(g_prev)
template <class T>
void film_gate(const AgentParams<T>& params, const std::vector<T>& z_raw,
               const std::vector<T>& g_prev, std::vector<T>& z, std::vector<T>& gamma,
               std::vector<T>& beta) {
    std::vector<T> gb;
    affine_forward(params.store[params.film_w], params.store[params.film_b], g_prev, gb);
    gamma.assign(gb.begin(), gb.begin() + kZDim);
    beta.assign(gb.begin() + kZDim, gb.end());
    z.resize(kZDim);
    for (int i = 0; i < kZDim; ++i) z[i] = (T(1) + gamma[i]) * z_raw[i] + beta[i];
}

// EMA of one-hot actions followed by the proprioception encoder. With no
// previous action the trace stays at zero.
template <class T>
void proprio_update(const AgentParams<T>& params, const std::vector<T>& p_ema_prev,
                    int action_prev, std::vector<T>& p_ema, std::vector<T>& p, MlpCache<T>& c) {
    p_ema = p_ema_prev;
    if (action_prev >= 0) {
        for (int i = 0; i < kNumActions; ++i)
            p_ema[i] = T(kActionTraceDecay) * p_ema_prev[i] +
                       (T(1) - T(kActionTraceDecay)) * (i == action_prev ? T(1) : T(0));
    }
    p = mlp_forward(params.store, params.proprio, p_ema, c);
}

// Updates the error EMAs in place, then reports the 6-dim feature vector
// [cur_err, err_short, err_long, err_short - err_long, flag, trace].
template <class T>
std::vector<T> compute_error_features(AgentState<T>& state, T cur_err, bool perturbed) {
    state.err_short = T(kErrShortDecay) * state.err_short + (T(1) - T(kErrShortDecay)) * cur_err;
    state.err_long = T(kErrLongDecay) * state.err_long + (T(1) - T(kErrLongDecay)) * cur_err;
    state.perturb_trace = T(kPerturbTraceDecay) * state.perturb_trace +
                          (T(1) - T(kPerturbTraceDecay)) * (perturbed ? T(1) : T(0));
    return {cur_err,       state.err_short,     state.err_long,
            state.err_short - state.err_long, perturbed ? T(1) : T(0), state.perturb_trace};
}

// alpha = lo + (hi - lo) * sigm(AlphaNet(z, p, g_prev, e))
template <class T>
T compute_alpha(const AgentParams<T>& params, const std::vector<T>& z, const std::vector<T>& p,
                const std::vector<T>& g_prev, const std::vector<T>& e, T lo, T hi,
                MlpCache<T>& c, std::vector<T>& concat_in, T& sig_out) {
    concat_in.clear();
    concat_in.insert(concat_in.end(), z.begin(), z.end());
    concat_in.insert(concat_in.end(), p.begin(), p.end());
    concat_in.insert(concat_in.end(), g_prev.begin(), g_prev.end());
    concat_in.insert(concat_in.end(), e.begin(), e.end());
    const auto& out = mlp_forward(params.store, params.alpha_net, concat_in, c);
    sig_out = sigmoid(out[0]);
    return lo + (hi - lo) * sig_out;
}

template <class T>
T compute_alpha(const AgentParams<T>& params, const std::vector<T>& z, const std::vector<T>& p,
                const std::vector<T>& g_prev, const std::vector<T>& e, T lo, T hi) {
    MlpCache<T> c;
    std::vector<T> in;
    T sig;
    return compute_alpha(params, z, p, g_prev, e, lo, hi, c, in, sig);
}

// g = (1 - alpha) * g_prev + alpha * LN(GRU(z ++ p, g_prev))
template <class T>
std::vector<T> update_perspective(const AgentParams<T>& params, const std::vector<T>& z,
                                  const std::vector<T>& p, const std::vector<T>& g_prev, T alpha,
                                  GruCache<T>& gc, LayerNormCache<T>& lc) {
    std::vector<T> zp;
    zp.reserve(kZDim + kPDim);
    zp.insert(zp.end(), z.begin(), z.end());
    zp.insert(zp.end(), p.begin(), p.end());
    gru_forward(params.store, params.gru, zp, g_prev, gc);
    const auto& cand = layer_norm_forward(params.store, params.gru_ln, gc.out, lc);
    std::vector<T> g(kGDim);
    for (int i = 0; i < kGDim; ++i) g[i] = (T(1) - alpha) * g_prev[i] + alpha * cand[i];
    return g;
}

template <class T>
std::vector<T> update_perspective(const AgentParams<T>& params, const std::vector<T>& z,
                                  const std::vector<T>& p, const std::vector<T>& g_prev, T alpha) {
    GruCache<T> gc;
    LayerNormCache<T> lc;
    return update_perspective(params, z, p, g_prev, alpha, gc, lc);
}

template <class T>
std::vector<T> policy_state(const AgentParams<T>& params, const std::vector<T>& z,
                            const std::vector<T>& p, const std::vector<T>& g, MlpCache<T>& c,
                            std::vector<T>& concat_in) {
    concat_in.clear();
    concat_in.insert(concat_in.end(), z.begin(), z.end());
    concat_in.insert(concat_in.end(), p.begin(), p.end());
    concat_in.insert(concat_in.end(), g.begin(), g.end());
    return mlp_forward(params.store, params.state_head, concat_in, c);
}

template <class T>
std::vector<T> policy_state(const AgentParams<T>& params, const std::vector<T>& z,
                            const std::vector<T>& p, const std::vector<T>& g) {
    MlpCache<T> c;
    std::vector<T> in;
    return policy_state(params, z, p, g, c, in);
}

// Samples from softmax(logits); consumes exactly one uniform draw.
template <class T>
int select_action(const AgentParams<T>& params, const std::vector<T>& s, RngStream& rng,
                  std::vector<T>& logits, std::vector<T>& probs) {
    affine_forward(params.store[params.policy_w], params.store[params.policy_b], s, logits);
    softmax(logits, probs);
    T u = static_cast<T>(rng.uniform());
    T acc = T(0);
    for (int i = 0; i < kNumActions; ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return kNumActions - 1;
}

template <class T>
std::vector<T> decode_next(const AgentParams<T>& params, const std::vector<T>& g, int action,
                           MlpCache<T>& c, std::vector<T>& concat_in) {
    concat_in.assign(g.begin(), g.end());
    for (int i = 0; i < kNumActions; ++i) concat_in.push_back(i == action ? T(1) : T(0));
    return mlp_forward(params.store, params.decoder, concat_in, c);
}

template <class T>
std::vector<T> decode_next(const AgentParams<T>& params, const std::vector<T>& g, int action) {
    MlpCache<T> c;
    std::vector<T> in;
    return decode_next(params, g, action, c, in);
}

// ---- full step ----
//
// encode -> gate -> proprio -> error features -> alpha -> perspective
// update -> policy state -> action -> next-observation prediction.
// Advances the carried state; fills the tape for a later backward pass.
// forced_action >= 0 substitutes for sampling (no draw consumed); used
// by gradient checks, which need the discrete choice pinned.
template <class T>
void agent_step(const AgentParams<T>& params, AgentState<T>& state, const std::vector<T>& x,
                bool perturbed, const StepMode& mode, RngStream& rng, StepTape<T>& tape,
                int forced_action = -1) {
    tape.mode = mode;
    tape.perturbed = perturbed;
    tape.g_prev = state.g;

    tape.z_raw = mlp_forward(params.store, params.encoder, x, tape.enc_c);
    if (mode.film_active) {
        film_gate(params, tape.z_raw, state.g, tape.z, tape.gamma, tape.beta);
    } else {
        tape.z = tape.z_raw;
        tape.gamma.assign(kZDim, T(0));
        tape.beta.assign(kZDim, T(0));
    }

    std::vector<T> p_ema_new;
    proprio_update(params, state.p_ema, state.prev_action, p_ema_new, tape.p, tape.prop_c);

    tape.cur_err = state.prev_prediction ? mse(*state.prev_prediction, x) : T(0);
    tape.e = compute_error_features(state, tape.cur_err, perturbed);

    if (mode.alpha.adaptive) {
        tape.alpha = compute_alpha(params, tape.z, tape.p, tape.g_prev, tape.e,
                                   T(mode.alpha.lo), T(mode.alpha.hi), tape.alpha_c,
                                   tape.alpha_in, tape.alpha_sig);
    } else {
        tape.alpha = T(mode.alpha.fixed_value);
    }

    tape.g_new = update_perspective(params, tape.z, tape.p, tape.g_prev, tape.alpha, tape.gru_c,
                                    tape.ln_c);
    tape.cand = tape.ln_c.y;

    tape.s = policy_state(params, tape.z, tape.p, tape.g_new, tape.state_c, tape.state_in);
    if (forced_action >= 0) {
        affine_forward(params.store[params.policy_w], params.store[params.policy_b], tape.s,
                       tape.logits);
        softmax(tape.logits, tape.probs);
        tape.action = forced_action;
    } else {
        tape.action = select_action(params, tape.s, rng, tape.logits, tape.probs);
    }
    tape.predicted_next = decode_next(params, tape.g_new, tape.action, tape.dec_c, tape.dec_in);

    state.g = tape.g_new;
    state.p_ema = p_ema_new;
    state.prev_prediction = tape.predicted_next;
    state.prev_action = tape.action;
}

// Backward through one step tape. Upstream gradients: d_pred on the
// next-observation prediction, d_g on the updated perspective, d_logits
// on the policy logits; any of them may be empty. p_ema and the error
// features are stop-gradients. When d_g_prev is non-null it receives the
// gradient with respect to the carried-in perspective (all four paths:
// the (1-a) carry, the GRU hidden input, the AlphaNet input slice, and
// the gate conditioning), so the caller can chain one step further back.
template <class T>
void agent_step_backward(AgentParams<T>& params, const StepTape<T>& tape,
                         const std::vector<T>& d_pred, const std::vector<T>& d_g,
                         const std::vector<T>& d_logits, std::vector<T>* d_g_prev = nullptr) {
    std::vector<T> dg(kGDim, T(0)), dz(kZDim, T(0)), dp(kPDim, T(0));
    std::vector<T> dgp(kGDim, T(0));
    if (!d_g.empty())
        for (int i = 0; i < kGDim; ++i) dg[i] += d_g[i];

    if (!d_pred.empty()) {
        std::vector<T> din;
        mlp_backward(params.store, params.decoder, tape.dec_c, d_pred, &din);
        for (int i = 0; i < kGDim; ++i) dg[i] += din[i];
    }

    if (!d_logits.empty()) {
        std::vector<T> ds;
        affine_backward(params.store[params.policy_w], params.store[params.policy_b], tape.s,
                        d_logits, &ds);
        std::vector<T> din;
        mlp_backward(params.store, params.state_head, tape.state_c, ds, &din);
        for (int i = 0; i < kZDim; ++i) dz[i] += din[i];
        for (int i = 0; i < kPDim; ++i) dp[i] += din[kZDim + i];
        for (int i = 0; i < kGDim; ++i) dg[i] += din[kZDim + kPDim + i];
    }

    // perspective update: g = (1-a) g_prev + a cand
    T dalpha = T(0);
    for (int i = 0; i < kGDim; ++i) {
        dalpha += dg[i] * (tape.cand[i] - tape.g_prev[i]);
        dgp[i] += dg[i] * (T(1) - tape.alpha);
    }
    std::vector<T> dcand(kGDim);
    for (int i = 0; i < kGDim; ++i) dcand[i] = dg[i] * tape.alpha;
    std::vector<T> dgru_out;
    layer_norm_backward(params.store, params.gru_ln, tape.ln_c, dcand, &dgru_out);
    std::vector<T> dzp, dh;
    gru_backward(params.store, params.gru, tape.gru_c, dgru_out, &dzp,
                 d_g_prev ? &dh : static_cast<std::vector<T>*>(nullptr));
    for (int i = 0; i < kZDim; ++i) dz[i] += dzp[i];
    for (int i = 0; i < kPDim; ++i) dp[i] += dzp[kZDim + i];
    if (d_g_prev)
        for (int i = 0; i < kGDim; ++i) dgp[i] += dh[i];

    if (tape.mode.alpha.adaptive && dalpha != T(0)) {
        T da = dalpha * (T(tape.mode.alpha.hi) - T(tape.mode.alpha.lo)) * tape.alpha_sig *
               (T(1) - tape.alpha_sig);
        std::vector<T> din;
        mlp_backward(params.store, params.alpha_net, tape.alpha_c, {da}, &din);
        for (int i = 0; i < kZDim; ++i) dz[i] += din[i];
        for (int i = 0; i < kPDim; ++i) dp[i] += din[kZDim + i];
        if (d_g_prev)
            for (int i = 0; i < kGDim; ++i) dgp[i] += din[kZDim + kPDim + i];
    }

    // salience gate
    std::vector<T> dz_raw(kZDim);
    if (tape.mode.film_active) {
        std::vector<T> dgb(2 * kZDim);
        for (int i = 0; i < kZDim; ++i) {
            dgb[i] = dz[i] * tape.z_raw[i];  // d gamma
            dgb[kZDim + i] = dz[i];          // d beta
        }
        std::vector<T> dfilm_in;
        affine_backward(params.store[params.film_w], params.store[params.film_b], tape.g_prev,
                        dgb, d_g_prev ? &dfilm_in : static_cast<std::vector<T>*>(nullptr));
        if (d_g_prev)
            for (int i = 0; i < kGDim; ++i) dgp[i] += dfilm_in[i];
        for (int i = 0; i < kZDim; ++i) dz_raw[i] = dz[i] * (T(1) + tape.gamma[i]);
    } else {
        dz_raw = dz;
    }
    mlp_backward(params.store, params.encoder, tape.enc_c, dz_raw,
                 static_cast<std::vector<T>*>(nullptr));
    mlp_backward(params.store, params.proprio, tape.prop_c, dp,
                 static_cast<std::vector<T>*>(nullptr));
    if (d_g_prev) *d_g_prev = dgp;
}

template <class T>
T entropy_of(const std::vector<T>& probs) {
    T h = T(0);
    for (T p : probs)
        if (p > T(0)) h -= p * std::log(p);
    return h;
}

}  // namespace pagc
