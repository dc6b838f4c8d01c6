#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pagc/training.hpp"

namespace pagc {

// Floats are printed with 9 significant digits, enough for binary32 to
// round-trip exactly.
inline std::string csv_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

inline std::string runlog_csv_header() {
    std::string h = "episode,block,n_p,mean_alpha,mean_pred_error,g_norm";
    for (int i = 0; i < kGDim; ++i) h += ",g_" + std::to_string(i);
    for (int i = 0; i < kZDim; ++i) h += ",gamma_" + std::to_string(i);
    for (int i = 0; i < kNumZones; ++i) h += ",zone_" + std::to_string(i);
    return h;
}

inline std::string runlog_to_csv(const RunLog& log) {
    std::string out = runlog_csv_header() + "\n";
    for (const auto& r : log) {
        out += std::to_string(r.episode) + "," + std::to_string(r.block) + "," +
               std::to_string(r.n_p) + "," + csv_float(r.mean_alpha) + "," +
               csv_float(r.mean_pred_error) + "," + csv_float(r.g_norm);
        for (float v : r.g_end) out += "," + csv_float(v);
        for (float v : r.gamma_mean) out += "," + csv_float(v);
        for (int v : r.zone_counts) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline RunLog runlog_from_csv(const std::string& text) {
    std::istringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw std::runtime_error("runlog csv: empty file");
    if (line != runlog_csv_header()) throw std::runtime_error("runlog csv: unexpected header");
    RunLog log;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 6u + kGDim + kZDim + kNumZones)
            throw std::runtime_error("runlog csv: bad column count");
        EpisodeRecord r;
        size_t k = 0;
        r.episode = std::stoi(cells[k++]);
        r.block = std::stoi(cells[k++]);
        r.n_p = std::stoi(cells[k++]);
        r.mean_alpha = std::stof(cells[k++]);
        r.mean_pred_error = std::stof(cells[k++]);
        r.g_norm = std::stof(cells[k++]);
        for (int i = 0; i < kGDim; ++i) r.g_end[i] = std::stof(cells[k++]);
        for (int i = 0; i < kZDim; ++i) r.gamma_mean[i] = std::stof(cells[k++]);
        for (int i = 0; i < kNumZones; ++i) r.zone_counts[i] = std::stoi(cells[k++]);
        log.push_back(r);
    }
    return log;
}

inline std::string stage1_metrics_csv_header() {
    std::string h = "seed,episode,mean_pred_error,mean_entropy";
    for (int i = 0; i < kNumZones; ++i) h += ",zone_" + std::to_string(i);
    return h;
}

inline void append_stage1_metrics(std::string& out, int seed,
                                  const std::vector<Stage1EpisodeRecord>& metrics) {
    for (const auto& r : metrics) {
        out += std::to_string(seed) + "," + std::to_string(r.episode) + "," +
               csv_float(r.mean_pred_error) + "," + csv_float(r.mean_entropy);
        for (int v : r.zone_counts) out += "," + std::to_string(v);
        out += "\n";
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write file: " + path);
    f << text;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void ensure_dir(const std::string& path) {
    std::filesystem::create_directories(path);
}

}  // namespace pagc
