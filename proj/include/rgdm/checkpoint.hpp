#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgdm/error.hpp"
#include "rgdm/net.hpp"
#include "rgdm/optimizer.hpp"

namespace rgdm {

// On-disk layout (all integers and floats little-endian):
//   "RGDM" | u32 version=1 | u64 metadata length | UTF-8 JSON metadata
//   | u64 param count | params f64[] | optional Adam m[] then v[]
// The optimizer arrays are present iff metadata["has_optimizer_state"].
struct Checkpoint {
    nlohmann::json meta;
    std::vector<double> params;
    std::optional<OptimizerState> opt;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const std::string what;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw CheckpointError(what + ": truncated (need " + std::to_string(n) + " bytes at " +
                                  std::to_string(pos) + ", have " + std::to_string(buf.size()) +
                                  ")");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::string out;
    out += "RGDM";
    detail::put_u32(out, 1);
    const std::string meta = ckpt.meta.dump();
    detail::put_u64(out, meta.size());
    out += meta;
    detail::put_u64(out, ckpt.params.size());
    for (double v : ckpt.params) detail::put_f64(out, v);
    if (ckpt.opt) {
        if (ckpt.opt->m.size() != ckpt.params.size() || ckpt.opt->v.size() != ckpt.params.size())
            throw CheckpointError("save_checkpoint: optimizer arrays do not match params");
        for (double v : ckpt.opt->m) detail::put_f64(out, v);
        for (double v : ckpt.opt->v) detail::put_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_checkpoint: cannot open '" + path.string() + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f.good()) throw IoError("save_checkpoint: write failed for '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_checkpoint: cannot open '" + path.string() + "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    detail::Reader r{buf, 0, path.filename().string()};

    if (r.bytes(4) != "RGDM") throw CheckpointError(r.what + ": bad magic");
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw CheckpointError(r.what + ": unsupported version " + std::to_string(version));

    Checkpoint ckpt;
    const std::uint64_t meta_len = r.u64();
    try {
        ckpt.meta = nlohmann::json::parse(r.bytes(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(r.what + ": metadata does not parse: " + e.what());
    }

    const std::uint64_t n = r.u64();
    ckpt.params.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) ckpt.params[i] = r.f64();

    const bool has_opt = ckpt.meta.value("has_optimizer_state", false);
    if (has_opt) {
        OptimizerState st(n);
        for (std::uint64_t i = 0; i < n; ++i) st.m[i] = r.f64();
        for (std::uint64_t i = 0; i < n; ++i) st.v[i] = r.f64();
        st.step = ckpt.meta.value("optimizer_step", 0LL);
        ckpt.opt = std::move(st);
    }
    if (r.pos != buf.size())
        throw CheckpointError(r.what + ": " + std::to_string(buf.size() - r.pos) +
                              " trailing bytes");
    return ckpt;
}

}  // namespace rgdm
