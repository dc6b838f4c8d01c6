#pragma once

#include <array>
#include <functional>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pagc/agent.hpp"
#include "pagc/gridworld.hpp"
#include "pagc/nn.hpp"
#include "pagc/rng.hpp"

namespace pagc {

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const std::set<std::string>& stage1_trainable_modules() {
    static const std::set<std::string> s = {"encoder", "proprio", "gru",
                                            "state_head", "policy", "decoder"};
    return s;
}

inline const std::set<std::string>& stage2_trainable_modules() {
    static const std::set<std::string> s = {"film", "gru", "alpha_net"};
    return s;
}

inline const std::set<std::string>& stage2_frozen_modules() {
    static const std::set<std::string> s = {"encoder", "proprio", "state_head", "policy",
                                            "decoder"};
    return s;
}

// Fresh stage-2 perspective-module initialization: the layer-norm gain
// starts small so the latent scale is grown by training, input weights
// are scaled up so early candidates are input-driven, and the recurrent
// matrices start at zero so recurrent structure is grown by training.
inline float kFreshLnGain = 0.1f;
inline float kFreshInputScale = 12.0f;
inline float kFreshRecurrentScale = 0.0f;

struct LossWeights {
    float pred = 1.0f;
    float smooth = 0.1f;
    float actor = 0.5f;
    float entropy = 0.01f;
};

// Weighted loss components; total is their sum. Actor and entropy terms
// are signed, the rest are non-negative.
struct LossParts {
    float total = 0.0f;
    float pred = 0.0f;
    float smooth = 0.0f;
    float actor = 0.0f;
    float entropy = 0.0f;
};

inline LossParts compute_losses(const std::vector<float>* prediction,
                                const std::vector<float>* target,
                                const std::vector<float>& g_new, const std::vector<float>& g_prev,
                                const std::vector<float>* probs, float actor_term,
                                const LossWeights& w) {
    LossParts parts;
    if (prediction && target) parts.pred = w.pred * mse(*prediction, *target);
    float sm = 0.0f;
    for (size_t i = 0; i < g_new.size(); ++i) {
        float d = g_new[i] - g_prev[i];
        sm += d * d;
    }
    parts.smooth = w.smooth * sm;
    if (probs) parts.entropy = w.entropy * (-entropy_of(*probs));
    parts.actor = w.actor * actor_term;
    parts.total = parts.pred + parts.smooth + parts.actor + parts.entropy;
    return parts;
}

struct Stage1Config {
    float sigma_left = 0.60f;
    float sigma_right = 0.03f;
    int total_steps = 36000;
    int steps_per_episode = 240;
    float learning_rate = 3e-4f;
    float fixed_alpha = 0.10f;
    LossWeights weights;  // pred 1.0, smooth 0.1, actor 0.5, entropy 0.01
    int actor_period = 16;

    int episodes() const { return total_steps / steps_per_episode; }

    void validate() const {
        if (sigma_left < 0.0f || sigma_right < 0.0f)
            throw std::invalid_argument("stage1: noise std must be non-negative");
        if (steps_per_episode <= 0 || total_steps <= 0 ||
            total_steps % steps_per_episode != 0)
            throw std::invalid_argument("stage1: total_steps must be a multiple of steps_per_episode");
        if (actor_period <= 0) throw std::invalid_argument("stage1: actor_period must be positive");
    }
};

struct Stage2Config {
    float sigma_left = 0.20f;
    float sigma_right = 0.10f;
    int episodes = 150;
    int block_len = 50;
    int steps_per_episode = 240;
    std::array<int, 3> block_np = {0, 0, 0};
    float alpha_lo = 0.03f;
    float alpha_hi = 0.30f;
    float learning_rate = 3e-4f;
    float lambda_pred = 1.0f;
    float lambda_smooth = 0.1f;
    int perturb_window_len = 15;

    int block_of(int episode) const { return std::min(episode / block_len, 2); }

    void validate() const {
        if (sigma_left < 0.0f || sigma_right < 0.0f)
            throw std::invalid_argument("stage2: noise std must be non-negative");
        if (block_len <= 0 || episodes != 3 * block_len)
            throw std::invalid_argument("stage2: episodes must equal 3 * block_len");
        if (!(alpha_lo < alpha_hi))
            throw std::invalid_argument("stage2: alpha bounds must satisfy lo < hi");
        for (int np : block_np)
            if (np < 0 || np * perturb_window_len > steps_per_episode)
                throw std::invalid_argument("stage2: infeasible perturbation count");
    }
};

// One RunLog row.
struct EpisodeRecord {
    int episode = 0;
    int block = 0;
    int n_p = 0;
    float mean_alpha = 0.0f;
    float mean_pred_error = 0.0f;
    float g_norm = 0.0f;
    std::array<float, kGDim> g_end{};
    std::array<float, kZDim> gamma_mean{};
    std::array<int, kNumZones> zone_counts{};
};

using RunLog = std::vector<EpisodeRecord>;

struct Stage1EpisodeRecord {
    int episode = 0;
    float mean_pred_error = 0.0f;
    float mean_entropy = 0.0f;
    std::array<int, kNumZones> zone_counts{};
};

struct Stage1Result {
    AgentParams<float> params;
    std::vector<Stage1EpisodeRecord> metrics;
    long long env_steps = 0;
    long long adam_steps = 0;
};

namespace detail {

inline void check_finite_loss(const LossParts& parts, const char* stage, long long step) {
    if (std::isfinite(parts.total)) return;
    std::ostringstream os;
    os << stage << " step " << step << ": non-finite loss (pred=" << parts.pred
       << ", smooth=" << parts.smooth << ", actor=" << parts.actor
       << ", entropy=" << parts.entropy << ")";
    throw TrainingError(os.str());
}

// d(-H)/dlogits for the entropy penalty and d(log pi_a)/dlogits for
// REINFORCE.
inline void entropy_grad(const std::vector<float>& probs, float scale, std::vector<float>& out) {
    float h = entropy_of(probs);
    out.resize(probs.size());
    for (size_t i = 0; i < probs.size(); ++i)
        out[i] = scale * probs[i] * (std::log(std::max(probs[i], 1e-30f)) + h);
}

inline void logprob_grad(const std::vector<float>& probs, int action, std::vector<float>& out) {
    out.resize(probs.size());
    for (size_t i = 0; i < probs.size(); ++i)
        out[i] = (static_cast<int>(i) == action ? 1.0f : 0.0f) - probs[i];
}

}  // namespace detail

// Stage 1: end-to-end backbone training on the strong noise gradient.
// The salience gate is bypassed and the perspective update runs at a
// fixed rate. Fully online: the step-t graph is closed when x_{t+1}
// arrives, and every environment step applies exactly one Adam step
// (episode-final graphs close without a prediction term, since the
// position reset breaks the prediction chain).
inline Stage1Result stage1_train(const Stage1Config& cfg, uint64_t world_seed,
                                 uint64_t train_seed) {
    cfg.validate();
    Stage1Result res;
    res.params.init(seed_from("params", train_seed));
    res.params.set_trainable_modules(stage1_trainable_modules());
    auto& params = res.params;

    GridWorld world = new_world(cfg.sigma_left, cfg.sigma_right, world_seed);
    RngStream rng(seed_from("stage1", world_seed, train_seed));
    Adam<float> adam(params.store, cfg.learning_rate);
    StepMode mode{/*film_active=*/false, AlphaMode::Fixed(cfg.fixed_alpha)};

    AgentState<float> state;
    StepTape<float> tapes[2];
    int cur = 0;
    bool pending = false;

    // delayed actor window over completed prediction steps
    struct ActorEntry {
        std::vector<float> grad_logp;
        float logp = 0.0f;
        float reward = 0.0f;
    };
    std::vector<ActorEntry> window;
    window.reserve(cfg.actor_period);
    std::vector<float> d_pred, d_g, d_logits, d_ent;
    std::vector<float> xvec;

    const int episodes = cfg.episodes();
    const LossWeights& w = cfg.weights;

    auto close_pending = [&](const StepTape<float>& tape, const std::vector<float>* target) {
        const std::vector<float>* pred = target ? &tape.predicted_next : nullptr;
        LossParts parts = compute_losses(pred, target, tape.g_new, tape.g_prev, &tape.probs,
                                         0.0f, w);
        detail::check_finite_loss(parts, "stage1", res.adam_steps);

        if (target && w.actor != 0.0f) {
            // stash the log-prob gradient while the grad buffers are clean
            detail::logprob_grad(tape.probs, tape.action, d_logits);
            agent_step_backward(params, tape, {}, {}, d_logits);
            ActorEntry entry;
            params.store.grads_to_flat(entry.grad_logp);
            entry.logp = std::log(std::max(tape.probs[tape.action], 1e-30f));
            entry.reward = -mse(tape.predicted_next, *target);
            window.push_back(std::move(entry));
            params.store.zero_grads();
        }

        d_pred.clear();
        if (target) {
            d_pred.resize(kPatchDim);
            for (int i = 0; i < kPatchDim; ++i)
                d_pred[i] = w.pred * 2.0f / kPatchDim * (tape.predicted_next[i] - (*target)[i]);
        }
        d_g.resize(kGDim);
        for (int i = 0; i < kGDim; ++i)
            d_g[i] = 2.0f * w.smooth * (tape.g_new[i] - tape.g_prev[i]);
        detail::entropy_grad(tape.probs, w.entropy, d_ent);
        agent_step_backward(params, tape, d_pred, d_g, d_ent);

        if (static_cast<int>(window.size()) == cfg.actor_period) {
            // returns-to-go with the window mean as baseline
            const int K = cfg.actor_period;
            std::vector<float> ret(K);
            float acc = 0.0f;
            for (int i = K - 1; i >= 0; --i) {
                acc += window[i].reward;
                ret[i] = acc;
            }
            float baseline = 0.0f;
            for (float r : ret) baseline += r;
            baseline /= K;
            for (int i = 0; i < K; ++i)
                params.store.add_flat_to_grads(window[i].grad_logp,
                                               -w.actor * (ret[i] - baseline));
            window.clear();
        }
        adam.step(params.store);
        ++res.adam_steps;
    };

    for (int ep = 0; ep < episodes; ++ep) {
        AgentPos pos = center_pos();
        state.prev_prediction.reset();
        double err_sum = 0.0;
        int err_count = 0;
        double ent_sum = 0.0;
        std::array<int, kNumZones> zones{};
        for (int t = 0; t < cfg.steps_per_episode; ++t) {
            Observation obs = observe(world, pos, false, rng);
            xvec.assign(obs.begin(), obs.end());
            if (pending) close_pending(tapes[1 - cur], t > 0 ? &xvec : nullptr);

            bool had_prev = state.prev_prediction.has_value();
            agent_step(params, state, xvec, false, mode, rng, tapes[cur]);
            const StepTape<float>& tape = tapes[cur];
            if (had_prev) {
                err_sum += tape.cur_err;
                ++err_count;
            }
            ent_sum += entropy_of(tape.probs);
            zones[zone_of(pos.col)]++;
            pos = step_action(world, pos, static_cast<Action>(tape.action));
            pending = true;
            cur = 1 - cur;
            ++res.env_steps;
        }
        Stage1EpisodeRecord rec;
        rec.episode = ep;
        rec.mean_pred_error = err_count ? static_cast<float>(err_sum / err_count) : 0.0f;
        rec.mean_entropy = static_cast<float>(ent_sum / cfg.steps_per_episode);
        rec.zone_counts = zones;
        res.metrics.push_back(rec);
    }
    if (pending) close_pending(tapes[1 - cur], nullptr);  // run-final graph, no target
    return res;
}

struct Stage2Result {
    AgentParams<float> params;
    RunLog log;
    long long env_steps = 0;
    long long adam_steps = 0;
    bool frozen_intact = false;
};

namespace detail {

inline uint64_t frozen_hash(const ParamStore<float>& ps) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : ps.tensors) {
        if (t.trainable) continue;
        h = fnv1a(t.name.data(), t.name.size(), h);
        h = fnv1a(t.v.data(), t.v.size() * sizeof(float), h);
    }
    return h;
}

}  // namespace detail

// Stage 2: loads a first-stage backbone, freezes it, and trains only the
// salience gate and the perspective module (GRU + AlphaNet), online,
// while logging one RunLog record per episode. Training and evaluation
// are the same pass. Updates happen only for steps whose prediction
// target arrived (239 per episode).
inline Stage2Result stage2_run(const Stage2Config& cfg, const AgentParams<float>& base,
                               uint64_t world_seed, uint64_t run_seed, uint64_t schedule_key,
                               const AlphaMode& alpha_mode,
                               const std::function<void(const StepTape<float>&)>* step_hook =
                                   nullptr) {
    cfg.validate();
    Stage2Result res;
    res.params = base;
    auto& params = res.params;
    params.set_trainable_modules(stage2_trainable_modules());
    // The self-modulating extension replaces the stage-1 fixed-rate
    // update: the gate, GRU and AlphaNet start fresh from the run seed,
    // only the frozen behavioral backbone carries over. The fresh
    // layer-norm gain starts small so the latent scale is grown by
    // training instead of starting at the normalization ceiling.
    params.init_modules(seed_from("stage2-init", run_seed), stage2_trainable_modules());
    {
        auto& gain = params.store[params.store.find("gru.ln_gain")];
        std::fill(gain.v.begin(), gain.v.end(), kFreshLnGain);
        for (const char* n : {"gru.w_r", "gru.w_u", "gru.w_n"}) {
            auto& t = params.store[params.store.find(n)];
            for (auto& v : t.v) v *= kFreshInputScale;
        }
        for (const char* n : {"gru.u_r", "gru.u_u", "gru.u_n"}) {
            auto& t = params.store[params.store.find(n)];
            for (auto& v : t.v) v *= kFreshRecurrentScale;
        }
    }
    const uint64_t frozen_before = detail::frozen_hash(params.store);

    GridWorld world = new_world(cfg.sigma_left, cfg.sigma_right, world_seed);
    RngStream rng(seed_from("stage2", world_seed, run_seed));
    Adam<float> adam(params.store, cfg.learning_rate);

    AlphaMode alpha = alpha_mode;
    if (alpha.adaptive) {
        alpha.lo = cfg.alpha_lo;
        alpha.hi = cfg.alpha_hi;
    }
    StepMode mode{/*film_active=*/true, alpha};

    LossWeights w;
    w.pred = cfg.lambda_pred;
    w.smooth = cfg.lambda_smooth;
    w.actor = 0.0f;
    w.entropy = 0.0f;

    AgentState<float> state;
    // updates use an overlapping two-step window: the closed step's loss
    // backpropagates through its own tape and one step further into the
    // carried perspective, still one Adam step per environment step
    StepTape<float> tapes[3];
    int cur = 0;
    long long steps_done = 0;
    std::vector<float> d_pred(kPatchDim), d_g(kGDim), d_g_prev, xvec;

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        const int block = cfg.block_of(ep);
        const int n_p = cfg.block_np[block];
        RngStream sched_rng(hash_combine(schedule_key, static_cast<uint64_t>(ep)));
        PerturbationSchedule sched = schedule_perturbations(n_p, cfg.steps_per_episode,
                                                            cfg.perturb_window_len, sched_rng);
        AgentPos pos = center_pos();
        state.prev_prediction.reset();

        double alpha_sum = 0.0, err_sum = 0.0;
        int err_count = 0;
        std::array<double, kZDim> gamma_sum{};
        std::array<int, kNumZones> zones{};

        for (int t = 0; t < cfg.steps_per_episode; ++t) {
            bool perturbed = sched.active(t);
            Observation obs = observe(world, pos, perturbed, rng);
            xvec.assign(obs.begin(), obs.end());

            if (steps_done >= 1 && t > 0) {
                const StepTape<float>& t1 = tapes[(cur + 2) % 3];
                LossParts parts = compute_losses(&t1.predicted_next, &xvec, t1.g_new, t1.g_prev,
                                                 nullptr, 0.0f, w);
                detail::check_finite_loss(parts, "stage2", res.adam_steps);
                for (int i = 0; i < kPatchDim; ++i)
                    d_pred[i] = w.pred * 2.0f / kPatchDim * (t1.predicted_next[i] - xvec[i]);
                for (int i = 0; i < kGDim; ++i)
                    d_g[i] = 2.0f * w.smooth * (t1.g_new[i] - t1.g_prev[i]);
                const bool chain = steps_done >= 2;
                agent_step_backward(params, t1, d_pred, d_g, {}, chain ? &d_g_prev : nullptr);
                if (chain) {
                    // the smoothness term also touches the carried-in
                    // perspective directly, not only through the update
                    for (int i = 0; i < kGDim; ++i) d_g_prev[i] -= d_g[i];
                    agent_step_backward(params, tapes[(cur + 1) % 3], {}, d_g_prev, {});
                }
                adam.step(params.store);
                ++res.adam_steps;
            }

            bool had_prev = state.prev_prediction.has_value();
            agent_step(params, state, xvec, perturbed, mode, rng, tapes[cur]);
            const StepTape<float>& tape = tapes[cur];
            if (step_hook) (*step_hook)(tape);
            alpha_sum += tape.alpha;
            if (had_prev) {
                err_sum += tape.cur_err;
                ++err_count;
            }
            for (int i = 0; i < kZDim; ++i) gamma_sum[i] += tape.gamma[i];
            zones[zone_of(pos.col)]++;
            pos = step_action(world, pos, static_cast<Action>(tape.action));
            cur = (cur + 1) % 3;
            ++steps_done;
            ++res.env_steps;
        }

        EpisodeRecord rec;
        rec.episode = ep;
        rec.block = block;
        rec.n_p = n_p;
        rec.mean_alpha = static_cast<float>(alpha_sum / cfg.steps_per_episode);
        rec.mean_pred_error = err_count ? static_cast<float>(err_sum / err_count) : 0.0f;
        double norm = 0.0;
        for (int i = 0; i < kGDim; ++i) {
            rec.g_end[i] = state.g[i];
            norm += static_cast<double>(state.g[i]) * state.g[i];
        }
        rec.g_norm = static_cast<float>(std::sqrt(norm));
        for (int i = 0; i < kZDim; ++i)
            rec.gamma_mean[i] = static_cast<float>(gamma_sum[i] / cfg.steps_per_episode);
        rec.zone_counts = zones;
        res.log.push_back(rec);
    }

    res.frozen_intact = detail::frozen_hash(params.store) == frozen_before;
    return res;
}

// Evaluation-only rollout: same dynamics, no parameter updates. Returns
// the mean realized prediction error over steps that had a prediction.
inline float eval_mean_pred_error(const AgentParams<float>& params_in, float sigma_left,
                                  float sigma_right, uint64_t world_seed, int episodes,
                                  int steps_per_episode, uint64_t eval_seed,
                                  const StepMode& mode) {
    AgentParams<float> params = params_in;
    GridWorld world = new_world(sigma_left, sigma_right, world_seed);
    RngStream rng(seed_from("eval", world_seed, eval_seed));
    AgentState<float> state;
    StepTape<float> tape;
    std::vector<float> xvec;
    double err_sum = 0.0;
    long long err_count = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        AgentPos pos = center_pos();
        state.prev_prediction.reset();
        for (int t = 0; t < steps_per_episode; ++t) {
            Observation obs = observe(world, pos, false, rng);
            xvec.assign(obs.begin(), obs.end());
            bool had_prev = state.prev_prediction.has_value();
            agent_step(params, state, xvec, false, mode, rng, tape);
            if (had_prev) {
                err_sum += tape.cur_err;
                ++err_count;
            }
            pos = step_action(world, pos, static_cast<Action>(tape.action));
        }
    }
    return err_count ? static_cast<float>(err_sum / err_count) : 0.0f;
}

}  // namespace pagc
