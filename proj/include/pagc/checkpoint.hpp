#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pagc/nn.hpp"
#include "pagc/rng.hpp"

namespace pagc {

// Parameter checkpoint, little-endian:
//   "PAGC" | u16 version | u32 group count
//   per group: u32 name len | name | u32 rank | u32 dims... | f32 values
//   trailing u64 FNV-1a checksum over all preceding bytes
constexpr uint16_t kCheckpointVersion = 1;

struct CheckpointGroup {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

namespace detail {

inline void put_u16(std::string& buf, uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        if (pos + n > buf.size())
            throw std::runtime_error("checkpoint truncated: " + path);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint8_t>(buf[pos + 1]) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

inline void write_checkpoint(const std::string& path, const ParamStore<float>& ps) {
    std::string buf;
    buf += "PAGC";
    detail::put_u16(buf, kCheckpointVersion);
    detail::put_u32(buf, static_cast<uint32_t>(ps.tensors.size()));
    for (const auto& t : ps.tensors) {
        detail::put_u32(buf, static_cast<uint32_t>(t.name.size()));
        buf += t.name;
        detail::put_u32(buf, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) detail::put_u32(buf, static_cast<uint32_t>(d));
        for (float v : t.v) detail::put_f32(buf, v);
    }
    detail::put_u64(buf, fnv1a(buf.data(), buf.size()));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<CheckpointGroup> read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 + 2 + 4 + 8 || buf.substr(0, 4) != "PAGC")
        throw std::runtime_error("bad checkpoint magic: " + path);
    uint64_t stored;
    {
        detail::Reader tail{buf, buf.size() - 8, path};
        stored = tail.u64();
    }
    uint64_t actual = fnv1a(buf.data(), buf.size() - 8);
    if (stored != actual) throw std::runtime_error("checkpoint checksum mismatch: " + path);

    detail::Reader r{buf, 4, path};
    uint16_t ver = r.u16();
    if (ver != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    uint32_t count = r.u32();
    std::vector<CheckpointGroup> groups;
    std::set<std::string> seen;
    for (uint32_t gi = 0; gi < count; ++gi) {
        CheckpointGroup g;
        uint32_t name_len = r.u32();
        g.name = r.str(name_len);
        if (!seen.insert(g.name).second)
            throw std::runtime_error("duplicate group name '" + g.name + "' in " + path);
        uint32_t rank = r.u32();
        size_t n = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            int dim = static_cast<int>(r.u32());
            g.shape.push_back(dim);
            n *= static_cast<size_t>(dim);
        }
        g.values.resize(n);
        for (size_t i = 0; i < n; ++i) g.values[i] = r.f32();
        groups.push_back(std::move(g));
    }
    if (r.pos != buf.size() - 8)
        throw std::runtime_error("checkpoint length mismatch: " + path);
    return groups;
}

// Copies checkpoint values into an existing store; every group must
// match a tensor of the same name and shape.
inline void apply_checkpoint(const std::vector<CheckpointGroup>& groups, ParamStore<float>& ps,
                             const std::string& path) {
    if (groups.size() != ps.tensors.size())
        throw std::runtime_error("checkpoint group count mismatch: " + path);
    for (const auto& g : groups) {
        int ti = ps.find(g.name);
        if (ti < 0) throw std::runtime_error("unknown group '" + g.name + "' in " + path);
        auto& t = ps[ti];
        if (t.shape != g.shape || t.v.size() != g.values.size())
            throw std::runtime_error("shape mismatch for group '" + g.name + "' in " + path);
        t.v = g.values;
    }
}

inline void load_checkpoint(const std::string& path, ParamStore<float>& ps) {
    apply_checkpoint(read_checkpoint(path), ps, path);
}

inline uint64_t file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return fnv1a(buf.data(), buf.size());
}

}  // namespace pagc
