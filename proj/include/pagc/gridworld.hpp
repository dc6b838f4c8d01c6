#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "pagc/rng.hpp"

namespace pagc {

constexpr int kGridWidth = 23;
constexpr int kGridHeight = 7;
constexpr int kNumZones = 5;
constexpr int kNumActions = 5;
constexpr int kPatchDim = 8;

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };

struct AgentPos {
    int col = 0;
    int row = 0;
    bool operator==(const AgentPos&) const = default;
};

inline AgentPos center_pos() { return {kGridWidth / 2, kGridHeight / 2}; }

using Observation = std::array<float, kPatchDim>;

// Neighbor offsets in patch order: N, NE, E, SE, S, SW, W, NW.
// Row 0 is the top of the grid, so north decrements the row.
constexpr std::array<std::array<int, 2>, kPatchDim> kNeighborOffsets = {{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1},
}};

// Fixed 23x7 scaffold: a seeded per-cell mean-value field plus a linear
// left-to-right observation-noise gradient.
struct GridWorld {
    int width = kGridWidth;
    int height = kGridHeight;
    float sigma_left = 0.0f;
    float sigma_right = 0.0f;
    uint64_t world_seed = 0;
    std::vector<float> mean_field;  // row-major, height x width

    float mean_at(int col, int row) const { return mean_field[row * width + col]; }
};

inline GridWorld new_world(float sigma_left, float sigma_right, uint64_t world_seed) {
    if (sigma_left < 0.0f || sigma_right < 0.0f)
        throw std::invalid_argument("new_world: noise std must be non-negative");
    GridWorld w;
    w.sigma_left = sigma_left;
    w.sigma_right = sigma_right;
    w.world_seed = world_seed;
    w.mean_field.resize(static_cast<size_t>(w.width) * w.height);
    RngStream rng(seed_from("world", world_seed));
    for (auto& v : w.mean_field) v = static_cast<float>(rng.uniform());
    return w;
}

// Noise std at a column. A perturbation window mirrors the noise map
// horizontally; the mean field is untouched.
inline float column_sigma(const GridWorld& w, int col, bool perturbed) {
    if (col < 0 || col >= w.width) throw std::out_of_range("column_sigma: column out of range");
    int c = perturbed ? (w.width - 1 - col) : col;
    return w.sigma_left + (w.sigma_right - w.sigma_left) * static_cast<float>(c) / static_cast<float>(w.width - 1);
}

// 8-neighbor local patch. Out-of-bounds neighbors read exactly 0; their
// noise draws are still consumed so the stream stays aligned.
inline Observation observe(const GridWorld& w, AgentPos pos, bool perturbed, RngStream& rng) {
    if (pos.col < 0 || pos.col >= w.width || pos.row < 0 || pos.row >= w.height)
        throw std::out_of_range("observe: position out of bounds");
    Observation patch{};
    for (int i = 0; i < kPatchDim; ++i) {
        int c = pos.col + kNeighborOffsets[i][0];
        int r = pos.row + kNeighborOffsets[i][1];
        float eps = static_cast<float>(rng.normal());
        if (c < 0 || c >= w.width || r < 0 || r >= w.height) {
            patch[i] = 0.0f * eps;
        } else {
            patch[i] = w.mean_at(c, r) + eps * column_sigma(w, c, perturbed);
        }
    }
    return patch;
}

inline AgentPos step_action(const GridWorld& w, AgentPos pos, Action a) {
    AgentPos out = pos;
    switch (a) {
        case Action::Up: out.row -= 1; break;
        case Action::Down: out.row += 1; break;
        case Action::Left: out.col -= 1; break;
        case Action::Right: out.col += 1; break;
        case Action::Stay: break;
    }
    out.col = std::clamp(out.col, 0, w.width - 1);
    out.row = std::clamp(out.row, 0, w.height - 1);
    return out;
}

inline int zone_of(int col) {
    if (col < 0 || col >= kGridWidth) throw std::out_of_range("zone_of: column out of range");
    return col * kNumZones / kGridWidth;
}

// Non-overlapping observation-inversion windows, [start, end] inclusive.
struct PerturbationSchedule {
    std::vector<std::pair<int, int>> windows;
    int window_len = 15;

    bool active(int step) const {
        for (auto& [s, e] : windows)
            if (step >= s && step <= e) return true;
        return false;
    }
    int perturbed_steps() const {
        int n = 0;
        for (auto& [s, e] : windows) n += e - s + 1;
        return n;
    }
};

// Uniform draw over all non-overlapping placements: rejection sampling
// over sorted random starts, with an exact combinatorial fallback
// (Floyd subset sampling through the gap bijection) for tight packings
// where rejection would practically never terminate.
inline PerturbationSchedule schedule_perturbations(int n_p, int episode_len, int window_len,
                                                   RngStream& rng) {
    if (n_p < 0 || window_len <= 0 || n_p * window_len > episode_len)
        throw std::invalid_argument("schedule_perturbations: infeasible window count");
    PerturbationSchedule sched;
    sched.window_len = window_len;
    if (n_p == 0) return sched;

    const int max_start = episode_len - window_len;  // inclusive
    std::vector<int> starts(n_p);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (int i = 0; i < n_p; ++i) starts[i] = static_cast<int>(rng.uniform_int(max_start + 1));
        std::sort(starts.begin(), starts.end());
        bool ok = true;
        for (int i = 0; i + 1 < n_p; ++i)
            if (starts[i + 1] - starts[i] < window_len) { ok = false; break; }
        if (ok) {
            for (int s : starts) sched.windows.emplace_back(s, s + window_len - 1);
            return sched;
        }
    }

    // Fallback: sample a uniform n_p-subset of {0..slack+n_p-1} (Floyd),
    // then map the sorted subset back to window starts.
    const int slack = episode_len - n_p * window_len;
    const int domain = slack + n_p;
    std::set<int> subset;
    for (int j = domain - n_p; j < domain; ++j) {
        int t = static_cast<int>(rng.uniform_int(j + 1));
        if (!subset.insert(t).second) subset.insert(j);
    }
    int i = 0;
    for (int w : subset) {
        int start = (w - i) + i * window_len;
        sched.windows.emplace_back(start, start + window_len - 1);
        ++i;
    }
    return sched;
}

}  // namespace pagc
