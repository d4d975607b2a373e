#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <zlib.h>

#include "fpqe/common.hpp"
#include "fpqe/rng.hpp"
#include "fpqe/tensor.hpp"

// IDX (MNIST/FashionMNIST) and CIFAR-10 binary readers, a fixture-grade IDX
// writer, and balanced binary-pair subset construction. Parsing is byte-exact;
// gzip-compressed IDX files are decompressed transparently.

namespace fpqe {

struct LabeledImage {
    Tensor pixels;  // [C,H,W], values = raw byte / 255
    int label = 0;
};

namespace detail {

inline std::vector<unsigned char> read_all_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

inline std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in,
                                         const std::string& origin) {
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
        throw ParseError(origin + ": zlib init failed");
    }
    std::vector<unsigned char> out;
    out.resize(std::max<std::size_t>(in.size() * 4, 1 << 16));
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    std::size_t written = 0;
    int rc = Z_OK;
    do {
        if (written == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw ParseError(origin + ": gzip stream corrupt (zlib " + std::to_string(rc) + ")");
        }
        written = out.size() - zs.avail_out;
    } while (rc != Z_STREAM_END);
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

inline std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
    auto bytes = read_all_bytes(path);
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
        return gunzip(bytes, path);
    }
    return bytes;
}

inline std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off,
                          const std::string& origin) {
    if (off + 4 > b.size()) {
        throw ParseError(origin + ": truncated at byte offset " + std::to_string(off));
    }
    return (static_cast<std::uint32_t>(b[off]) << 24) |
           (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

inline void put_be32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>(v & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

inline std::vector<LabeledImage> load_idx(const std::string& images_path,
                                          const std::string& labels_path) {
    const auto img = detail::read_maybe_gzip(images_path);
    const auto lbl = detail::read_maybe_gzip(labels_path);

    if (detail::be32(img, 0, images_path) != kIdxImagesMagic) {
        throw ParseError(images_path + ": bad magic at byte offset 0, expected 0x00000803");
    }
    const std::uint32_t n = detail::be32(img, 4, images_path);
    const std::uint32_t rows = detail::be32(img, 8, images_path);
    const std::uint32_t cols = detail::be32(img, 12, images_path);
    const std::size_t need = 16 + static_cast<std::size_t>(n) * rows * cols;
    if (img.size() != need) {
        throw ParseError(images_path + ": payload length " + std::to_string(img.size()) +
                         " != expected " + std::to_string(need) + " (truncation at byte offset " +
                         std::to_string(std::min(img.size(), need)) + ")");
    }

    if (detail::be32(lbl, 0, labels_path) != kIdxLabelsMagic) {
        throw ParseError(labels_path + ": bad magic at byte offset 0, expected 0x00000801");
    }
    const std::uint32_t nl = detail::be32(lbl, 4, labels_path);
    if (nl != n) {
        throw ParseError(labels_path + ": label count " + std::to_string(nl) +
                         " does not match image count " + std::to_string(n));
    }
    if (lbl.size() != 8 + static_cast<std::size_t>(nl)) {
        throw ParseError(labels_path + ": payload length " + std::to_string(lbl.size()) +
                         " != expected " + std::to_string(8 + nl) + " (truncation at byte offset " +
                         std::to_string(std::min(lbl.size(), std::size_t{8} + nl)) + ")");
    }

    std::vector<LabeledImage> out;
    out.reserve(n);
    std::size_t off = 16;
    for (std::uint32_t i = 0; i < n; ++i) {
        LabeledImage li;
        li.pixels = Tensor({1, static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols)});
        for (std::size_t p = 0; p < static_cast<std::size_t>(rows) * cols; ++p) {
            li.pixels.data[p] = static_cast<double>(img[off + p]) / 255.0;
        }
        off += static_cast<std::size_t>(rows) * cols;
        li.label = static_cast<int>(lbl[8 + i]);
        out.push_back(std::move(li));
    }
    return out;
}

// Fixture-grade writer; byte-exact inverse of load_idx for 8-bit grayscale.
inline void write_idx(const std::vector<LabeledImage>& images, const std::string& images_path,
                      const std::string& labels_path) {
    if (images.empty()) throw ConfigError("write_idx: empty dataset");
    const std::int64_t rows = images.front().pixels.shape[1];
    const std::int64_t cols = images.front().pixels.shape[2];
    std::ofstream io(images_path, std::ios::binary);
    std::ofstream lo(labels_path, std::ios::binary);
    if (!io || !lo) throw IoError("cannot open IDX output files");
    detail::put_be32(io, kIdxImagesMagic);
    detail::put_be32(io, static_cast<std::uint32_t>(images.size()));
    detail::put_be32(io, static_cast<std::uint32_t>(rows));
    detail::put_be32(io, static_cast<std::uint32_t>(cols));
    detail::put_be32(lo, kIdxLabelsMagic);
    detail::put_be32(lo, static_cast<std::uint32_t>(images.size()));
    for (const auto& li : images) {
        if (li.pixels.shape[0] != 1 || li.pixels.shape[1] != rows || li.pixels.shape[2] != cols) {
            throw ShapeError("write_idx: inconsistent image shapes");
        }
        for (double v : li.pixels.data) {
            const int byte = static_cast<int>(std::lround(v * 255.0));
            io.put(static_cast<char>(std::clamp(byte, 0, 255)));
        }
        lo.put(static_cast<char>(li.label));
    }
    if (!io || !lo) throw IoError("short write while emitting IDX files");
}

// CIFAR-10 binary batches: records of 1 label byte + 3072 channel-planar
// pixel bytes. An empty file yields zero images with a warning.
inline std::vector<LabeledImage> load_cifar10(const std::vector<std::string>& batch_paths) {
    constexpr std::size_t kRecord = 3073;
    std::vector<LabeledImage> out;
    for (const auto& path : batch_paths) {
        const auto bytes = detail::read_all_bytes(path);
        if (bytes.empty()) {
            std::cerr << "warning: " << path << " is empty, no records loaded\n";
            continue;
        }
        if (bytes.size() % kRecord != 0) {
            throw ParseError(path + ": length " + std::to_string(bytes.size()) +
                             " is not a multiple of the 3073-byte record size");
        }
        const std::size_t n = bytes.size() / kRecord;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = i * kRecord;
            LabeledImage li;
            li.label = static_cast<int>(bytes[off]);
            li.pixels = Tensor({3, 32, 32});
            for (std::size_t p = 0; p < 3072; ++p) {
                li.pixels.data[p] = static_cast<double>(bytes[off + 1 + p]) / 255.0;
            }
            out.push_back(std::move(li));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binary pair subsets
// ---------------------------------------------------------------------------

struct PairDataset {
    std::vector<LabeledImage> images;  // labels remapped to {0,1}
    std::vector<std::size_t> source_indices;
    int label_zero = 0;  // lower original class id
    int label_one = 0;
    std::string split;
    std::uint64_t seed = 0;
};

struct PairSplits {
    PairDataset train;
    PairDataset test;
};

// Draws balanced, disjoint train/test subsets for one (a,b) class pair. The
// lower original id maps to 0. Counts are balanced within one image.
inline PairSplits make_pair(const std::vector<LabeledImage>& pool, int a, int b, int n_train,
                            int n_test, std::uint64_t seed) {
    if (a == b) throw ConfigError("make_pair: classes must differ");
    if (n_train < 1 || n_test < 0) throw ConfigError("make_pair: bad subset sizes");
    const int lo = std::min(a, b), hi = std::max(a, b);
    std::vector<std::size_t> lo_idx, hi_idx;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].label == lo) lo_idx.push_back(i);
        else if (pool[i].label == hi) hi_idx.push_back(i);
    }
    const int lo_train = (n_train + 1) / 2, hi_train = n_train / 2;
    const int lo_test = (n_test + 1) / 2, hi_test = n_test / 2;
    if (static_cast<int>(lo_idx.size()) < lo_train + lo_test ||
        static_cast<int>(hi_idx.size()) < hi_train + hi_test) {
        throw ConfigError("make_pair: need " + std::to_string(lo_train + lo_test) + "/" +
                          std::to_string(hi_train + hi_test) + " samples of classes " +
                          std::to_string(lo) + "/" + std::to_string(hi) + ", have " +
                          std::to_string(lo_idx.size()) + "/" + std::to_string(hi_idx.size()));
    }
    Rng rng(Rng::derive(seed, 0x70616972ULL));
    rng.shuffle(lo_idx);
    rng.shuffle(hi_idx);

    auto take = [&pool, lo](const std::vector<std::size_t>& idx, int start, int count, int label01,
                            PairDataset& dst) {
        (void)lo;
        for (int i = 0; i < count; ++i) {
            LabeledImage li = pool[idx[static_cast<std::size_t>(start + i)]];
            li.label = label01;
            dst.images.push_back(std::move(li));
            dst.source_indices.push_back(idx[static_cast<std::size_t>(start + i)]);
        }
    };

    PairSplits out;
    for (PairDataset* d : {&out.train, &out.test}) {
        d->label_zero = lo;
        d->label_one = hi;
        d->seed = seed;
    }
    out.train.split = "train";
    out.test.split = "test";
    take(lo_idx, 0, lo_train, 0, out.train);
    take(hi_idx, 0, hi_train, 1, out.train);
    take(lo_idx, lo_train, lo_test, 0, out.test);
    take(hi_idx, hi_train, hi_test, 1, out.test);

    // Interleave deterministically so batches see both classes early.
    Rng mix(Rng::derive(seed, 0x6d6978ULL));
    auto shuffle_pairwise = [&mix](PairDataset& d) {
        std::vector<std::size_t> order(d.images.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        mix.shuffle(order);
        std::vector<LabeledImage> imgs;
        std::vector<std::size_t> src;
        imgs.reserve(order.size());
        src.reserve(order.size());
        for (std::size_t i : order) {
            imgs.push_back(std::move(d.images[i]));
            src.push_back(d.source_indices[i]);
        }
        d.images = std::move(imgs);
        d.source_indices = std::move(src);
    };
    shuffle_pairwise(out.train);
    shuffle_pairwise(out.test);
    return out;
}

}  // namespace fpqe
