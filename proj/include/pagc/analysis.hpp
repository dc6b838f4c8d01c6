#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pagc/experiments.hpp"
#include "pagc/training.hpp"

namespace pagc {

// Percentile by linear interpolation between closest ranks (inclusive):
// rank = p/100 * (n-1). The median of an even-sized set is the mean of
// the two central values.
inline double percentile_linear(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of empty set");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    size_t lo = static_cast<size_t>(rank);
    if (lo >= values.size() - 1) return values.back();
    double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

inline double median_of(const std::vector<double>& values) {
    return percentile_linear(values, 50.0);
}

// Two-level seed statistics: median across stage-2 seeds within each
// stage-1 seed, then median and IQR across the stage-1 medians.
struct HierarchicalSummary {
    std::map<int, double> s1_medians;
    double grand_median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    int missing = 0;

    double iqr() const { return p75 - p25; }
};

inline HierarchicalSummary hierarchical_summary(
    const std::map<std::pair<int, int>, double>& values, const SeedGrid* expected = nullptr) {
    if (values.empty()) throw std::invalid_argument("hierarchical_summary: no values");
    HierarchicalSummary hs;
    std::map<int, std::vector<double>> by_s1;
    for (const auto& [key, v] : values) by_s1[key.first].push_back(v);
    std::vector<double> medians;
    for (auto& [s1, vals] : by_s1) {
        double m = median_of(vals);
        hs.s1_medians[s1] = m;
        medians.push_back(m);
    }
    hs.grand_median = median_of(medians);
    hs.p25 = percentile_linear(medians, 25.0);
    hs.p75 = percentile_linear(medians, 75.0);
    if (expected) hs.missing = expected->runs() - static_cast<int>(values.size());
    return hs;
}

// ---- plasticity residue (first vs second no-perturbation block) ----

struct ResidueRow {
    std::string condition;
    HierarchicalSummary block0;
    HierarchicalSummary block2;
    HierarchicalSummary delta;  // block0 - block2, per run
};

inline std::vector<ResidueRow> plasticity_residue(
    const std::map<std::string, std::map<std::pair<int, int>, RunLog>>& logs_by_condition,
    int block_len = 50) {
    std::vector<ResidueRow> rows;
    for (const auto& [cond, logs] : logs_by_condition) {
        std::map<std::pair<int, int>, double> b0, b2, dl;
        for (const auto& [key, log] : logs) {
            double a0 = block_mean_alpha(log, 0, block_len);
            double a2 = block_mean_alpha(log, 2, block_len);
            b0[key] = a0;
            b2[key] = a2;
            dl[key] = a0 - a2;
        }
        ResidueRow row;
        row.condition = cond;
        row.block0 = hierarchical_summary(b0);
        row.block2 = hierarchical_summary(b2);
        row.delta = hierarchical_summary(dl);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- PCA over probe encodings ----

struct PcaProjection {
    std::vector<double> mean;
    std::array<std::vector<double>, 2> axes;  // orthonormal, eigenvalues descending
    std::array<double, 2> eigenvalues{};
    double total_variance = 0.0;
    bool degenerate = false;
    std::vector<std::array<double, 2>> proj_a, proj_b;
    std::array<double, 2> centroid_a{}, centroid_b{};
    std::array<std::array<double, 2>, 2> cov_a{}, cov_b{};
};

namespace detail {

inline std::vector<double> matvec(const std::vector<double>& m, const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<double> out(n, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) out[i] += m[i * n + j] * v[j];
    return out;
}

inline void normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0)
        for (double& x : v) x /= n;
}

// canonical sign: the entry of largest magnitude is positive
inline void canonicalize_sign(std::vector<double>& v) {
    size_t arg = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& x : v) x = -x;
}

// dominant eigenpair of a symmetric PSD matrix by power iteration; with
// `ortho` set, iterates in that vector's orthogonal complement. The
// projection runs twice per step: one pass loses orthogonality to
// rounding when the iterate is nearly parallel to `ortho`.
inline std::pair<double, std::vector<double>> power_iteration(const std::vector<double>& m,
                                                              size_t dim,
                                                              const std::vector<double>* ortho) {
    auto project_out = [&](std::vector<double>& w) {
        if (!ortho) return;
        for (int pass = 0; pass < 2; ++pass) {
            double dot = 0.0;
            for (size_t i = 0; i < dim; ++i) dot += w[i] * (*ortho)[i];
            for (size_t i = 0; i < dim; ++i) w[i] -= dot * (*ortho)[i];
        }
    };
    std::vector<double> v(dim);
    for (size_t i = 0; i < dim; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i);
    normalize(v);
    project_out(v);
    if (ortho) normalize(v);
    for (int iter = 0; iter < 100000; ++iter) {
        std::vector<double> w = matvec(m, v);
        project_out(w);
        double n = 0.0;
        for (double x : w) n += x * x;
        n = std::sqrt(n);
        if (n < 1e-300) return {0.0, std::vector<double>(dim, 0.0)};
        for (double& x : w) x /= n;
        double delta = 0.0, delta_flip = 0.0;
        for (size_t i = 0; i < dim; ++i) {
            delta += (w[i] - v[i]) * (w[i] - v[i]);
            delta_flip += (w[i] + v[i]) * (w[i] + v[i]);
        }
        v = w;
        if (std::min(delta, delta_flip) < 1e-30) break;
    }
    project_out(v);
    normalize(v);
    std::vector<double> mv = matvec(m, v);
    double lambda = 0.0;
    for (size_t i = 0; i < dim; ++i) lambda += v[i] * mv[i];
    return {lambda, v};
}

// deterministic unit vector orthogonal to v
inline std::vector<double> any_orthogonal(const std::vector<double>& v) {
    size_t arg = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) < std::abs(v[arg])) arg = i;
    std::vector<double> u(v.size(), 0.0);
    u[arg] = 1.0;
    double dot = 0.0;
    for (size_t i = 0; i < v.size(); ++i) dot += u[i] * v[i];
    for (size_t i = 0; i < v.size(); ++i) u[i] -= dot * v[i];
    normalize(u);
    return u;
}

}  // namespace detail

// Basis fit on the union of both point sets; sample covariance with the
// n-1 denominator; top-2 axes by power iteration with deflation.
inline PcaProjection pca_2d(const std::vector<std::vector<double>>& a,
                            const std::vector<std::vector<double>>& b) {
    const size_t n = a.size() + b.size();
    if (n < 3) throw std::invalid_argument("pca_2d: need at least 3 points");
    const size_t dim = (a.empty() ? b : a)[0].size();
    for (const auto& v : a)
        if (v.size() != dim) throw std::invalid_argument("pca_2d: inconsistent dimensions");
    for (const auto& v : b)
        if (v.size() != dim) throw std::invalid_argument("pca_2d: inconsistent dimensions");

    PcaProjection out;
    out.mean.assign(dim, 0.0);
    for (const auto& v : a)
        for (size_t i = 0; i < dim; ++i) out.mean[i] += v[i];
    for (const auto& v : b)
        for (size_t i = 0; i < dim; ++i) out.mean[i] += v[i];
    for (double& m : out.mean) m /= static_cast<double>(n);

    std::vector<double> cov(dim * dim, 0.0);
    auto accumulate = [&](const std::vector<double>& v) {
        for (size_t i = 0; i < dim; ++i)
            for (size_t j = 0; j < dim; ++j)
                cov[i * dim + j] += (v[i] - out.mean[i]) * (v[j] - out.mean[j]);
    };
    for (const auto& v : a) accumulate(v);
    for (const auto& v : b) accumulate(v);
    for (double& c : cov) c /= static_cast<double>(n - 1);
    for (size_t i = 0; i < dim; ++i) out.total_variance += cov[i * dim + i];

    if (out.total_variance < 1e-24) {
        out.degenerate = true;
        out.axes[0].assign(dim, 0.0);
        out.axes[1].assign(dim, 0.0);
        if (dim >= 2) {
            out.axes[0][0] = 1.0;
            out.axes[1][1] = 1.0;
        }
        out.proj_a.assign(a.size(), {0.0, 0.0});
        out.proj_b.assign(b.size(), {0.0, 0.0});
        return out;
    }

    auto [l1, v1] = detail::power_iteration(cov, dim, nullptr);
    detail::canonicalize_sign(v1);
    auto [l2, v2] = detail::power_iteration(cov, dim, &v1);
    if (l2 <= 0.0 || v2 == std::vector<double>(dim, 0.0)) {
        l2 = 0.0;
        v2 = detail::any_orthogonal(v1);
    }
    detail::canonicalize_sign(v2);
    out.eigenvalues = {l1, l2};
    out.axes = {v1, v2};

    auto project = [&](const std::vector<double>& v) {
        std::array<double, 2> p{0.0, 0.0};
        for (size_t i = 0; i < dim; ++i) {
            p[0] += (v[i] - out.mean[i]) * v1[i];
            p[1] += (v[i] - out.mean[i]) * v2[i];
        }
        return p;
    };
    for (const auto& v : a) out.proj_a.push_back(project(v));
    for (const auto& v : b) out.proj_b.push_back(project(v));

    auto stats = [](const std::vector<std::array<double, 2>>& pts, std::array<double, 2>& cen,
                    std::array<std::array<double, 2>, 2>& cv) {
        if (pts.empty()) return;
        cen = {0.0, 0.0};
        for (const auto& p : pts) {
            cen[0] += p[0];
            cen[1] += p[1];
        }
        cen[0] /= static_cast<double>(pts.size());
        cen[1] /= static_cast<double>(pts.size());
        if (pts.size() < 2) return;
        for (const auto& p : pts) {
            double dx = p[0] - cen[0], dy = p[1] - cen[1];
            cv[0][0] += dx * dx;
            cv[0][1] += dx * dy;
            cv[1][0] += dy * dx;
            cv[1][1] += dy * dy;
        }
        double denom = static_cast<double>(pts.size() - 1);
        for (auto& row : cv)
            for (auto& x : row) x /= denom;
    };
    stats(out.proj_a, out.centroid_a, out.cov_a);
    stats(out.proj_b, out.centroid_b, out.cov_b);
    return out;
}

// Elementwise mean difference across matched probes.
inline std::vector<double> per_dim_diff(const std::vector<std::vector<float>>& z_under_g,
                                        const std::vector<std::vector<float>>& z_null) {
    if (z_under_g.size() != z_null.size() || z_under_g.empty())
        throw std::invalid_argument("per_dim_diff: probe count mismatch");
    const size_t dim = z_under_g[0].size();
    std::vector<double> diff(dim, 0.0);
    for (size_t k = 0; k < z_under_g.size(); ++k) {
        if (z_under_g[k].size() != dim || z_null[k].size() != dim)
            throw std::invalid_argument("per_dim_diff: dimension mismatch");
        for (size_t i = 0; i < dim; ++i)
            diff[i] += static_cast<double>(z_under_g[k][i]) - static_cast<double>(z_null[k][i]);
    }
    for (double& d : diff) d /= static_cast<double>(z_under_g.size());
    return diff;
}

// ---- per-episode trajectories ----

// Hierarchical summary of a per-episode metric across the seed grid.
template <class Getter>
std::vector<HierarchicalSummary> episode_trajectory(
    const std::map<std::pair<int, int>, RunLog>& logs, Getter&& get) {
    if (logs.empty()) throw std::invalid_argument("episode_trajectory: no logs");
    const size_t episodes = logs.begin()->second.size();
    for (const auto& [key, log] : logs)
        if (log.size() != episodes)
            throw std::invalid_argument("episode_trajectory: logs of unequal length");
    std::vector<HierarchicalSummary> out;
    out.reserve(episodes);
    for (size_t e = 0; e < episodes; ++e) {
        std::map<std::pair<int, int>, double> vals;
        for (const auto& [key, log] : logs) vals[key] = get(log[e]);
        out.push_back(hierarchical_summary(vals));
    }
    return out;
}

inline double least_squares_slope(const std::vector<double>& y, size_t begin, size_t end) {
    if (end <= begin + 1 || end > y.size())
        throw std::invalid_argument("least_squares_slope: bad window");
    const double n = static_cast<double>(end - begin);
    double xbar = (n - 1.0) / 2.0, ybar = 0.0;
    for (size_t i = begin; i < end; ++i) ybar += y[i];
    ybar /= n;
    double num = 0.0, den = 0.0;
    for (size_t i = begin; i < end; ++i) {
        double dx = static_cast<double>(i - begin) - xbar;
        num += dx * (y[i] - ybar);
        den += dx * dx;
    }
    return num / den;
}

}  // namespace pagc
