#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pagc/rng.hpp"

namespace pagc {

enum class Act { Linear, Tanh };

// One named parameter tensor with its gradient buffer. "module.tensor"
// naming; the module prefix drives the trainable/frozen partition.
template <class T>
struct Tensor {
    std::string name;
    std::vector<int> shape;
    std::vector<T> v;
    std::vector<T> g;
    bool trainable = true;

    size_t size() const { return v.size(); }
};

template <class T>
struct ParamStore {
    std::vector<Tensor<T>> tensors;

    int add(const std::string& name, std::vector<int> shape, bool trainable = true) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        Tensor<T> t;
        t.name = name;
        t.shape = std::move(shape);
        t.v.assign(n, T(0));
        t.g.assign(n, T(0));
        t.trainable = trainable;
        tensors.push_back(std::move(t));
        return static_cast<int>(tensors.size()) - 1;
    }

    Tensor<T>& operator[](int i) { return tensors[i]; }
    const Tensor<T>& operator[](int i) const { return tensors[i]; }

    int find(const std::string& name) const {
        for (size_t i = 0; i < tensors.size(); ++i)
            if (tensors[i].name == name) return static_cast<int>(i);
        return -1;
    }

    void zero_grads() {
        for (auto& t : tensors) std::fill(t.g.begin(), t.g.end(), T(0));
    }

    size_t param_count() const {
        size_t n = 0;
        for (auto& t : tensors) n += t.size();
        return n;
    }

    // flat copy of all gradients, tensor order
    void grads_to_flat(std::vector<T>& out) const {
        out.clear();
        for (auto& t : tensors) out.insert(out.end(), t.g.begin(), t.g.end());
    }

    void add_flat_to_grads(const std::vector<T>& flat, T scale) {
        size_t k = 0;
        for (auto& t : tensors)
            for (auto& g : t.g) g += scale * flat[k++];
    }
};

template <class T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// ---- affine: y = W x + b, W stored [out, in] row-major ----

template <class T>
void affine_forward(const Tensor<T>& W, const Tensor<T>& b, const std::vector<T>& x,
                    std::vector<T>& y) {
    const int out = W.shape[0], in = W.shape[1];
    if (static_cast<int>(x.size()) != in) throw std::invalid_argument("affine_forward: dim mismatch");
    y.assign(out, T(0));
    for (int o = 0; o < out; ++o) {
        T acc = b.v[o];
        const T* w = &W.v[static_cast<size_t>(o) * in];
        for (int i = 0; i < in; ++i) acc += w[i] * x[i];
        y[o] = acc;
    }
}

template <class T>
void affine_backward(Tensor<T>& W, Tensor<T>& b, const std::vector<T>& x, const std::vector<T>& dy,
                     std::vector<T>* dx) {
    const int out = W.shape[0], in = W.shape[1];
    for (int o = 0; o < out; ++o) {
        T d = dy[o];
        b.g[o] += d;
        T* wg = &W.g[static_cast<size_t>(o) * in];
        for (int i = 0; i < in; ++i) wg[i] += d * x[i];
    }
    if (dx) {
        dx->assign(in, T(0));
        for (int o = 0; o < out; ++o) {
            T d = dy[o];
            const T* w = &W.v[static_cast<size_t>(o) * in];
            for (int i = 0; i < in; ++i) (*dx)[i] += w[i] * d;
        }
    }
}

// ---- MLP: two Tanh hidden layers plus an affine output head ----

struct MlpSpec {
    int w0 = -1, b0 = -1, w1 = -1, b1 = -1, w2 = -1, b2 = -1;
    int in = 0, hidden = 0, out = 0;
    Act out_act = Act::Linear;
};

template <class T>
MlpSpec add_mlp(ParamStore<T>& ps, const std::string& name, int in, int hidden, int out,
                Act out_act) {
    MlpSpec s;
    s.in = in;
    s.hidden = hidden;
    s.out = out;
    s.out_act = out_act;
    s.w0 = ps.add(name + ".w0", {hidden, in});
    s.b0 = ps.add(name + ".b0", {hidden});
    s.w1 = ps.add(name + ".w1", {hidden, hidden});
    s.b1 = ps.add(name + ".b1", {hidden});
    s.w2 = ps.add(name + ".w2", {out, hidden});
    s.b2 = ps.add(name + ".b2", {out});
    return s;
}

template <class T>
struct MlpCache {
    std::vector<T> x, h0, h1, y;
};

template <class T>
const std::vector<T>& mlp_forward(const ParamStore<T>& ps, const MlpSpec& s,
                                  const std::vector<T>& x, MlpCache<T>& c) {
    c.x = x;
    affine_forward(ps[s.w0], ps[s.b0], c.x, c.h0);
    for (auto& v : c.h0) v = std::tanh(v);
    affine_forward(ps[s.w1], ps[s.b1], c.h0, c.h1);
    for (auto& v : c.h1) v = std::tanh(v);
    affine_forward(ps[s.w2], ps[s.b2], c.h1, c.y);
    if (s.out_act == Act::Tanh)
        for (auto& v : c.y) v = std::tanh(v);
    return c.y;
}

template <class T>
void mlp_backward(ParamStore<T>& ps, const MlpSpec& s, const MlpCache<T>& c,
                  const std::vector<T>& dy, std::vector<T>* dx) {
    std::vector<T> d = dy;
    if (s.out_act == Act::Tanh)
        for (size_t i = 0; i < d.size(); ++i) d[i] *= (T(1) - c.y[i] * c.y[i]);
    std::vector<T> dh1, dh0;
    affine_backward(ps[s.w2], ps[s.b2], c.h1, d, &dh1);
    for (size_t i = 0; i < dh1.size(); ++i) dh1[i] *= (T(1) - c.h1[i] * c.h1[i]);
    affine_backward(ps[s.w1], ps[s.b1], c.h0, dh1, &dh0);
    for (size_t i = 0; i < dh0.size(); ++i) dh0[i] *= (T(1) - c.h0[i] * c.h0[i]);
    affine_backward(ps[s.w0], ps[s.b0], c.x, dh0, dx);
}

// ---- GRU cell, reset-before-candidate ----
//
//   r = sigm(Wr x + Ur h + br)
//   u = sigm(Wu x + Uu h + bu)          (update gate)
//   n = tanh(Wn x + Un (r.h) + bn)
//   h' = (1-u).h + u.n

struct GruSpec {
    int w_r, u_r, b_r, w_u, u_u, b_u, w_n, u_n, b_n;
    int in = 0, hidden = 0;
};

template <class T>
GruSpec add_gru(ParamStore<T>& ps, const std::string& name, int in, int hidden) {
    GruSpec s;
    s.in = in;
    s.hidden = hidden;
    s.w_r = ps.add(name + ".w_r", {hidden, in});
    s.u_r = ps.add(name + ".u_r", {hidden, hidden});
    s.b_r = ps.add(name + ".b_r", {hidden});
    s.w_u = ps.add(name + ".w_u", {hidden, in});
    s.u_u = ps.add(name + ".u_u", {hidden, hidden});
    s.b_u = ps.add(name + ".b_u", {hidden});
    s.w_n = ps.add(name + ".w_n", {hidden, in});
    s.u_n = ps.add(name + ".u_n", {hidden, hidden});
    s.b_n = ps.add(name + ".b_n", {hidden});
    return s;
}

template <class T>
struct GruCache {
    std::vector<T> x, h, r, u, n, rh, out;
};

namespace detail {

// pre = W x + U h + b
template <class T>
void gru_pre(const ParamStore<T>& ps, int w, int u, int b, const std::vector<T>& x,
             const std::vector<T>& h, std::vector<T>& pre) {
    const auto& W = ps[w];
    const auto& U = ps[u];
    const int H = W.shape[0], I = W.shape[1];
    pre.assign(H, T(0));
    for (int o = 0; o < H; ++o) {
        T acc = ps[b].v[o];
        const T* wr = &W.v[static_cast<size_t>(o) * I];
        for (int i = 0; i < I; ++i) acc += wr[i] * x[i];
        const T* ur = &U.v[static_cast<size_t>(o) * H];
        for (int i = 0; i < H; ++i) acc += ur[i] * h[i];
        pre[o] = acc;
    }
}

// accumulate grads for pre = W x + U h + b given d(pre)
template <class T>
void gru_pre_backward(ParamStore<T>& ps, int w, int u, int b, const std::vector<T>& x,
                      const std::vector<T>& h, const std::vector<T>& dpre, std::vector<T>* dx,
                      std::vector<T>* dh) {
    auto& W = ps[w];
    auto& U = ps[u];
    const int H = W.shape[0], I = W.shape[1];
    for (int o = 0; o < H; ++o) {
        T d = dpre[o];
        ps[b].g[o] += d;
        T* wg = &W.g[static_cast<size_t>(o) * I];
        for (int i = 0; i < I; ++i) wg[i] += d * x[i];
        T* ug = &U.g[static_cast<size_t>(o) * H];
        for (int i = 0; i < H; ++i) ug[i] += d * h[i];
    }
    if (dx) {
        for (int o = 0; o < H; ++o) {
            T d = dpre[o];
            const T* wr = &W.v[static_cast<size_t>(o) * I];
            for (int i = 0; i < I; ++i) (*dx)[i] += wr[i] * d;
        }
    }
    if (dh) {
        for (int o = 0; o < H; ++o) {
            T d = dpre[o];
            const T* ur = &U.v[static_cast<size_t>(o) * H];
            for (int i = 0; i < H; ++i) (*dh)[i] += ur[i] * d;
        }
    }
}

}  // namespace detail

template <class T>
const std::vector<T>& gru_forward(const ParamStore<T>& ps, const GruSpec& s,
                                  const std::vector<T>& x, const std::vector<T>& h,
                                  GruCache<T>& c) {
    if (static_cast<int>(x.size()) != s.in || static_cast<int>(h.size()) != s.hidden)
        throw std::invalid_argument("gru_forward: dim mismatch");
    c.x = x;
    c.h = h;
    detail::gru_pre(ps, s.w_r, s.u_r, s.b_r, x, h, c.r);
    for (auto& v : c.r) v = sigmoid(v);
    detail::gru_pre(ps, s.w_u, s.u_u, s.b_u, x, h, c.u);
    for (auto& v : c.u) v = sigmoid(v);
    c.rh.resize(s.hidden);
    for (int i = 0; i < s.hidden; ++i) c.rh[i] = c.r[i] * c.h[i];
    detail::gru_pre(ps, s.w_n, s.u_n, s.b_n, x, c.rh, c.n);
    for (auto& v : c.n) v = std::tanh(v);
    c.out.resize(s.hidden);
    for (int i = 0; i < s.hidden; ++i) c.out[i] = (T(1) - c.u[i]) * c.h[i] + c.u[i] * c.n[i];
    return c.out;
}

template <class T>
void gru_backward(ParamStore<T>& ps, const GruSpec& s, const GruCache<T>& c,
                  const std::vector<T>& dout, std::vector<T>* dx, std::vector<T>* dh) {
    const int H = s.hidden;
    std::vector<T> da_u(H), da_n(H), dh_acc(H, T(0)), drh(H, T(0));
    std::vector<T> dx_acc;
    if (dx) dx_acc.assign(s.in, T(0));
    for (int i = 0; i < H; ++i) {
        T du = dout[i] * (c.n[i] - c.h[i]);
        da_u[i] = du * c.u[i] * (T(1) - c.u[i]);
        T dn = dout[i] * c.u[i];
        da_n[i] = dn * (T(1) - c.n[i] * c.n[i]);
        dh_acc[i] = dout[i] * (T(1) - c.u[i]);
    }
    detail::gru_pre_backward(ps, s.w_n, s.u_n, s.b_n, c.x, c.rh, da_n, dx ? &dx_acc : nullptr,
                             &drh);
    std::vector<T> da_r(H);
    for (int i = 0; i < H; ++i) {
        dh_acc[i] += drh[i] * c.r[i];
        da_r[i] = drh[i] * c.h[i] * c.r[i] * (T(1) - c.r[i]);
    }
    detail::gru_pre_backward(ps, s.w_r, s.u_r, s.b_r, c.x, c.h, da_r, dx ? &dx_acc : nullptr,
                             &dh_acc);
    detail::gru_pre_backward(ps, s.w_u, s.u_u, s.b_u, c.x, c.h, da_u, dx ? &dx_acc : nullptr,
                             &dh_acc);
    if (dx) *dx = dx_acc;
    if (dh) *dh = dh_acc;
}

// ---- layer normalization (eps 1e-5, learnable gain/bias) ----

struct LayerNormSpec {
    int gain = -1, bias = -1;
    int dim = 0;
};

template <class T>
LayerNormSpec add_layer_norm(ParamStore<T>& ps, const std::string& name, int dim) {
    if (dim < 2) throw std::invalid_argument("layer_norm: needs dim >= 2");
    LayerNormSpec s;
    s.dim = dim;
    s.gain = ps.add(name + ".ln_gain", {dim});
    s.bias = ps.add(name + ".ln_bias", {dim});
    return s;
}

template <class T>
struct LayerNormCache {
    std::vector<T> xhat, y;
    T inv_std = T(0);
};

template <class T>
const std::vector<T>& layer_norm_forward(const ParamStore<T>& ps, const LayerNormSpec& s,
                                         const std::vector<T>& x, LayerNormCache<T>& c) {
    const int n = static_cast<int>(x.size());
    if (n < 2) throw std::invalid_argument("layer_norm: input length must be >= 2");
    T mean = T(0);
    for (T v : x) mean += v;
    mean /= T(n);
    T var = T(0);
    for (T v : x) var += (v - mean) * (v - mean);
    var /= T(n);
    c.inv_std = T(1) / std::sqrt(var + T(1e-5));
    c.xhat.resize(n);
    c.y.resize(n);
    for (int i = 0; i < n; ++i) {
        c.xhat[i] = (x[i] - mean) * c.inv_std;
        c.y[i] = ps[s.gain].v[i] * c.xhat[i] + ps[s.bias].v[i];
    }
    return c.y;
}

template <class T>
void layer_norm_backward(ParamStore<T>& ps, const LayerNormSpec& s, const LayerNormCache<T>& c,
                         const std::vector<T>& dy, std::vector<T>* dx) {
    const int n = static_cast<int>(dy.size());
    std::vector<T> dxhat(n);
    for (int i = 0; i < n; ++i) {
        ps[s.gain].g[i] += dy[i] * c.xhat[i];
        ps[s.bias].g[i] += dy[i];
        dxhat[i] = dy[i] * ps[s.gain].v[i];
    }
    if (!dx) return;
    T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
    for (int i = 0; i < n; ++i) {
        mean_dxhat += dxhat[i];
        mean_dxhat_xhat += dxhat[i] * c.xhat[i];
    }
    mean_dxhat /= T(n);
    mean_dxhat_xhat /= T(n);
    dx->resize(n);
    for (int i = 0; i < n; ++i)
        (*dx)[i] = c.inv_std * (dxhat[i] - mean_dxhat - c.xhat[i] * mean_dxhat_xhat);
}

// ---- softmax ----

template <class T>
void softmax(const std::vector<T>& logits, std::vector<T>& probs) {
    probs.resize(logits.size());
    T mx = logits[0];
    for (T v : logits) mx = std::max(mx, v);
    T sum = T(0);
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (auto& p : probs) p /= sum;
}

// ---- Adam ----

template <class T>
struct Adam {
    T lr = T(3e-4);
    T beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);
    long long step_count = 0;
    std::vector<std::vector<T>> m, v;

    explicit Adam(const ParamStore<T>& ps, T learning_rate = T(3e-4)) : lr(learning_rate) {
        m.resize(ps.tensors.size());
        v.resize(ps.tensors.size());
        for (size_t i = 0; i < ps.tensors.size(); ++i) {
            m[i].assign(ps.tensors[i].size(), T(0));
            v[i].assign(ps.tensors[i].size(), T(0));
        }
    }

    // Bias-corrected update on trainable tensors; all gradients are
    // cleared afterwards, frozen tensors (values and moments) untouched.
    void step(ParamStore<T>& ps) {
        ++step_count;
        const T bc1 = T(1) - std::pow(beta1, T(step_count));
        const T bc2 = T(1) - std::pow(beta2, T(step_count));
        for (size_t i = 0; i < ps.tensors.size(); ++i) {
            auto& t = ps.tensors[i];
            if (t.trainable) {
                for (size_t k = 0; k < t.size(); ++k) {
                    T g = t.g[k];
                    m[i][k] = beta1 * m[i][k] + (T(1) - beta1) * g;
                    v[i][k] = beta2 * v[i][k] + (T(1) - beta2) * g * g;
                    T mhat = m[i][k] / bc1;
                    T vhat = v[i][k] / bc2;
                    t.v[k] -= lr * mhat / (std::sqrt(vhat) + eps);
                }
            }
            std::fill(t.g.begin(), t.g.end(), T(0));
        }
    }
};

// ---- finite-difference gradient checker ----
//
// Central differences against whatever analytic gradients the caller
// left in the store. Relative error carries an absolute floor so that
// near-zero gradient entries do not register as spurious failures.

template <class T>
struct GradCheckReport {
    std::map<std::string, T> max_rel_err;
    T overall = T(0);
};

template <class T>
GradCheckReport<T> grad_check(ParamStore<T>& ps, const std::vector<int>& tensor_idx,
                              const std::function<T()>& loss_fn, T h = T(1e-5),
                              T floor = T(1e-3)) {
    GradCheckReport<T> rep;
    for (int ti : tensor_idx) {
        auto& t = ps[ti];
        T worst = T(0);
        for (size_t k = 0; k < t.size(); ++k) {
            const T orig = t.v[k];
            t.v[k] = orig + h;
            T fp = loss_fn();
            t.v[k] = orig - h;
            T fm = loss_fn();
            t.v[k] = orig;
            T numeric = (fp - fm) / (T(2) * h);
            T analytic = t.g[k];
            T denom = std::max(std::max(std::abs(numeric), std::abs(analytic)), floor);
            worst = std::max(worst, std::abs(numeric - analytic) / denom);
        }
        rep.max_rel_err[t.name] = worst;
        rep.overall = std::max(rep.overall, worst);
    }
    return rep;
}

}  // namespace pagc
