#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "survfuse/error.hpp"
#include "survfuse/matrix.hpp"
#include "survfuse/params.hpp"

namespace survfuse {

// Checkpoint file layout (all integers little-endian):
//   bytes 0-7   magic "SFCKPT01"
//   u64         tensor count N
//   N times:    u32 name length, name bytes, u64 rows, u64 cols
//   N times:    rows*cols IEEE-754 doubles, row-major, as little-endian u64
namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw DataError(path + ": truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError(path + ": truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

} // namespace detail

inline constexpr char kCheckpointMagic[9] = "SFCKPT01";

inline void save_checkpoint(const std::string& path, const ParamStore& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write(kCheckpointMagic, 8);
    detail::put_u64(out, params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamEntry& e = params.entry(i);
        if (e.name.size() > 0xffffffffull) throw ConfigError("checkpoint: name too long");
        detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        detail::put_u64(out, e.value.rows);
        detail::put_u64(out, e.value.cols);
    }
    for (std::size_t i = 0; i < params.size(); ++i)
        for (double x : params.entry(i).value.v)
            detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
    if (!out) throw DataError("write failed for '" + path + "'");
}

// Loads values into an existing store: every stored tensor must exist under
// the same name with the same shape (architecture mismatch is an error).
inline void load_checkpoint(const std::string& path, ParamStore& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[8];
    if (!in.read(magic, 8) || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
        throw DataError(path + ": not a checkpoint file");
    const std::uint64_t count = detail::get_u64(in, path);
    if (count != params.size())
        throw DataError(path + ": holds " + std::to_string(count) + " tensors, model has " +
                        std::to_string(params.size()));
    struct Entry {
        std::string name;
        std::size_t rows, cols;
    };
    std::vector<Entry> entries;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t len = detail::get_u32(in, path);
        std::string name(len, '\0');
        if (len && !in.read(name.data(), len)) throw DataError(path + ": truncated checkpoint");
        const std::uint64_t rows = detail::get_u64(in, path);
        const std::uint64_t cols = detail::get_u64(in, path);
        entries.push_back({std::move(name), static_cast<std::size_t>(rows),
                           static_cast<std::size_t>(cols)});
    }
    for (const Entry& e : entries) {
        Matrix& m = params.value(e.name); // throws on unknown name
        if (m.rows != e.rows || m.cols != e.cols)
            throw DataError(path + ": tensor '" + e.name + "' is " + std::to_string(e.rows) +
                            "x" + std::to_string(e.cols) + ", model expects " + m.shape_str());
        for (double& x : m.v) x = std::bit_cast<double>(detail::get_u64(in, path));
    }
    in.peek();
    if (!in.eof()) throw DataError(path + ": trailing bytes after tensor data");
}

} // namespace survfuse
