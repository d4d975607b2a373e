#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fpqe/common.hpp"

namespace fpqe {

// Dense row-major tensor of 64-bit floats. The single value carrier for
// images, latents, weights and gradients.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(count(shape)), fill);
    }

    static Tensor from(std::vector<std::int64_t> s, std::vector<double> d) {
        if (count(s) != static_cast<std::int64_t>(d.size())) {
            throw ShapeError("tensor data length " + std::to_string(d.size()) +
                             " does not match shape " + shape_str(s));
        }
        Tensor t;
        t.shape = std::move(s);
        t.data = std::move(d);
        return t;
    }

    static std::int64_t count(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (auto d : s) {
            if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(s));
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    double& at2(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
    double at2(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * shape[1] + j)]; }

    double& at3(std::int64_t c, std::int64_t y, std::int64_t x) {
        return data[static_cast<std::size_t>((c * shape[1] + y) * shape[2] + x)];
    }
    double at3(std::int64_t c, std::int64_t y, std::int64_t x) const {
        return data[static_cast<std::size_t>((c * shape[1] + y) * shape[2] + x)];
    }

    double& at4(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
        return data[static_cast<std::size_t>(((n * shape[1] + c) * shape[2] + y) * shape[3] + x)];
    }
    double at4(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
        return data[static_cast<std::size_t>(((n * shape[1] + c) * shape[2] + y) * shape[3] + x)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    Tensor reshaped(std::vector<std::int64_t> s) const {
        if (count(s) != size()) {
            throw ShapeError("cannot reshape " + shape_str(shape) + " to " + shape_str(s));
        }
        Tensor t;
        t.shape = std::move(s);
        t.data = data;
        return t;
    }

    double norm2() const {
        double acc = 0.0;
        for (double v : data) acc += v * v;
        return std::sqrt(acc);
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static std::string shape_str(const std::vector<std::int64_t>& s) {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << ")";
        return os.str();
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(where) + ": " + Tensor::shape_str(a.shape) + " vs " +
                         Tensor::shape_str(b.shape));
    }
}

// ---------------------------------------------------------------------------
// FPQT flat binary container: "FPQT" magic, u32 version, u32 rank, u32 dims,
// then raw little-endian f64 payload. One tensor per file; checkpoints are
// directories of these plus a text manifest.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& is, const std::string& path, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw ParseError(path + ": truncated while reading " + what);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline bool host_is_little_endian() {
    const std::uint32_t probe = 1;
    unsigned char byte;
    std::memcpy(&byte, &probe, 1);
    return byte == 1;
}

}  // namespace detail

inline constexpr std::uint32_t kFpqtVersion = 1;

inline void write_fpqt(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write("FPQT", 4);
    detail::put_u32_le(os, kFpqtVersion);
    detail::put_u32_le(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) detail::put_u32_le(os, static_cast<std::uint32_t>(d));
    if (detail::host_is_little_endian()) {
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    } else {
        for (double v : t.data) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            os.write(reinterpret_cast<const char*>(b), 8);
        }
    }
    if (!os) throw IoError("short write to " + path);
}

inline Tensor read_fpqt(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "FPQT", 4) != 0) {
        throw ParseError(path + ": bad magic at offset 0, expected \"FPQT\"");
    }
    const std::uint32_t version = detail::get_u32_le(is, path, "version");
    if (version != kFpqtVersion) {
        throw ParseError(path + ": unsupported container version " + std::to_string(version));
    }
    const std::uint32_t rank = detail::get_u32_le(is, path, "rank");
    if (rank > 8) throw ParseError(path + ": implausible rank " + std::to_string(rank));
    std::vector<std::int64_t> shape(rank);
    std::int64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape[i] = static_cast<std::int64_t>(detail::get_u32_le(is, path, "dimension"));
        if (shape[i] <= 0) throw ParseError(path + ": non-positive dimension");
        n *= shape[i];
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data.resize(static_cast<std::size_t>(n));
    if (detail::host_is_little_endian()) {
        if (!is.read(reinterpret_cast<char*>(t.data.data()),
                     static_cast<std::streamsize>(t.data.size() * sizeof(double)))) {
            throw ParseError(path + ": truncated payload, expected " + std::to_string(n) +
                             " doubles");
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i) {
            unsigned char b[8];
            if (!is.read(reinterpret_cast<char*>(b), 8)) {
                throw ParseError(path + ": truncated payload");
            }
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            std::memcpy(&t.data[static_cast<std::size_t>(i)], &bits, 8);
        }
    }
    char extra;
    if (is.read(&extra, 1)) throw ParseError(path + ": trailing bytes after payload");
    return t;
}

}  // namespace fpqe
