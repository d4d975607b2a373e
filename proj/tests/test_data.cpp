#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include <zlib.h>

#include "fpqe/data.hpp"
#include "fpqe/synthdata.hpp"

using fpqe::LabeledImage;
using fpqe::Tensor;

namespace {

std::string tmp(const char* name) {
    std::filesystem::create_directories("test_tmp");
    return std::string("test_tmp/") + name;
}

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(is)),
                                      std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

std::vector<LabeledImage> two_image_fixture() {
    LabeledImage a;
    a.pixels = Tensor({1, 4, 4});
    for (std::int64_t i = 0; i < 16; ++i) a.pixels[i] = static_cast<double>(i * 16) / 255.0;
    a.label = 3;
    LabeledImage b;
    b.pixels = Tensor({1, 4, 4}, 1.0);
    b.label = 7;
    return {a, b};
}

std::vector<unsigned char> gzip_bytes(const std::vector<unsigned char>& in) {
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    REQUIRE(deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, 16 + MAX_WBITS, 8,
                         Z_DEFAULT_STRATEGY) == Z_OK);
    std::vector<unsigned char> out(in.size() + 256);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    REQUIRE(deflate(&zs, Z_FINISH) == Z_STREAM_END);
    out.resize(out.size() - zs.avail_out);
    deflateEnd(&zs);
    return out;
}

}  // namespace

TEST_CASE("idx writer/reader round trip is byte exact") {
    const auto fixture = two_image_fixture();
    const std::string img = tmp("fix-images-idx3-ubyte");
    const std::string lbl = tmp("fix-labels-idx1-ubyte");
    fpqe::write_idx(fixture, img, lbl);

    const auto loaded = fpqe::load_idx(img, lbl);
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded[0].label == 3);
    REQUIRE(loaded[1].label == 7);
    REQUIRE(loaded[0].pixels.data == fixture[0].pixels.data);

    // Re-serializing the parsed dataset reproduces the input bytes.
    const std::string img2 = tmp("fix2-images"), lbl2 = tmp("fix2-labels");
    fpqe::write_idx(loaded, img2, lbl2);
    REQUIRE(slurp(img) == slurp(img2));
    REQUIRE(slurp(lbl) == slurp(lbl2));
}

TEST_CASE("idx loader rejects malformed files without partial output") {
    const auto fixture = two_image_fixture();
    const std::string img = tmp("bad-images"), lbl = tmp("bad-labels");
    fpqe::write_idx(fixture, img, lbl);

    SECTION("truncated image payload") {
        auto bytes = slurp(img);
        bytes.resize(bytes.size() - 3);
        spit(tmp("trunc-images"), bytes);
        REQUIRE_THROWS_AS(fpqe::load_idx(tmp("trunc-images"), lbl), fpqe::ParseError);
    }
    SECTION("bad image magic") {
        auto bytes = slurp(img);
        bytes[3] = 0x55;
        spit(tmp("magic-images"), bytes);
        try {
            fpqe::load_idx(tmp("magic-images"), lbl);
            FAIL("expected parse error");
        } catch (const fpqe::ParseError& e) {
            REQUIRE(std::string(e.what()).find("offset 0") != std::string::npos);
        }
    }
    SECTION("label count mismatch") {
        auto bytes = slurp(lbl);
        bytes[7] = 9;
        spit(tmp("count-labels"), bytes);
        REQUIRE_THROWS_AS(fpqe::load_idx(img, tmp("count-labels")), fpqe::ParseError);
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(fpqe::load_idx(tmp("nope"), lbl), fpqe::IoError);
    }
}

TEST_CASE("gzip-compressed idx files are read transparently") {
    const auto fixture = two_image_fixture();
    const std::string img = tmp("gz-images"), lbl = tmp("gz-labels");
    fpqe::write_idx(fixture, img, lbl);
    spit(tmp("gz-images.gz"), gzip_bytes(slurp(img)));
    spit(tmp("gz-labels.gz"), gzip_bytes(slurp(lbl)));
    const auto loaded = fpqe::load_idx(tmp("gz-images.gz"), tmp("gz-labels.gz"));
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded[0].pixels.data == fixture[0].pixels.data);
}

TEST_CASE("cifar10 record parsing") {
    SECTION("handcrafted single record") {
        std::vector<unsigned char> record(3073, 0);
        record[0] = 5;                  // label
        record[1] = 255;                // R plane, first pixel
        record[1 + 1024] = 128;         // G plane, first pixel
        record[1 + 2048] = 64;          // B plane, first pixel
        record[1 + 1023] = 10;          // R plane, last pixel
        spit(tmp("cifar_one.bin"), record);
        const auto images = fpqe::load_cifar10({tmp("cifar_one.bin")});
        REQUIRE(images.size() == 1);
        REQUIRE(images[0].label == 5);
        REQUIRE(images[0].pixels.shape == std::vector<std::int64_t>{3, 32, 32});
        REQUIRE(images[0].pixels.at3(0, 0, 0) == 1.0);
        REQUIRE_THAT(images[0].pixels.at3(1, 0, 0),
                     Catch::Matchers::WithinAbs(128.0 / 255.0, 1e-12));
        REQUIRE_THAT(images[0].pixels.at3(2, 0, 0),
                     Catch::Matchers::WithinAbs(64.0 / 255.0, 1e-12));
        REQUIRE_THAT(images[0].pixels.at3(0, 31, 31),
                     Catch::Matchers::WithinAbs(10.0 / 255.0, 1e-12));
    }
    SECTION("length not a multiple of the record size") {
        spit(tmp("cifar_bad.bin"), std::vector<unsigned char>(3072, 0));
        REQUIRE_THROWS_AS(fpqe::load_cifar10({tmp("cifar_bad.bin")}), fpqe::ParseError);
    }
    SECTION("empty file yields zero images") {
        spit(tmp("cifar_empty.bin"), {});
        REQUIRE(fpqe::load_cifar10({tmp("cifar_empty.bin")}).empty());
    }
}

TEST_CASE("make_pair draws balanced, disjoint, seed-deterministic subsets") {
    const auto pool = fpqe::synth::make_corpus({0, 1, 3}, 60, 21);
    const auto splits = fpqe::make_pair(pool, 0, 1, 50, 20, 42);

    REQUIRE(splits.train.images.size() == 50);
    REQUIRE(splits.test.images.size() == 20);
    int train0 = 0, train1 = 0;
    for (const auto& li : splits.train.images) (li.label == 0 ? train0 : train1) += 1;
    REQUIRE(std::abs(train0 - train1) <= 1);
    REQUIRE(splits.train.label_zero == 0);
    REQUIRE(splits.train.label_one == 1);

    std::set<std::size_t> train_idx(splits.train.source_indices.begin(),
                                    splits.train.source_indices.end());
    for (std::size_t idx : splits.test.source_indices) {
        REQUIRE(train_idx.find(idx) == train_idx.end());
    }

    const auto again = fpqe::make_pair(pool, 0, 1, 50, 20, 42);
    REQUIRE(again.train.source_indices == splits.train.source_indices);
    REQUIRE(again.test.source_indices == splits.test.source_indices);
    const auto other = fpqe::make_pair(pool, 0, 1, 50, 20, 43);
    REQUIRE(other.train.source_indices != splits.train.source_indices);
}

TEST_CASE("make_pair remaps the lower original id to zero") {
    const auto pool = fpqe::synth::make_corpus({2, 8}, 30, 22);
    const auto splits = fpqe::make_pair(pool, 8, 2, 20, 10, 0);
    REQUIRE(splits.train.label_zero == 2);
    REQUIRE(splits.train.label_one == 8);
    for (const auto& li : splits.train.images) {
        REQUIRE((li.label == 0 || li.label == 1));
    }
}

TEST_CASE("make_pair rejects bad requests with counts") {
    const auto pool = fpqe::synth::make_corpus({0, 1}, 10, 23);
    REQUIRE_THROWS_AS(fpqe::make_pair(pool, 0, 0, 10, 5, 0), fpqe::ConfigError);
    try {
        fpqe::make_pair(pool, 0, 1, 30, 10, 0);
        FAIL("expected a config error");
    } catch (const fpqe::ConfigError& e) {
        REQUIRE(std::string(e.what()).find("10") != std::string::npos);
    }
}

TEST_CASE("synthetic corpus produces valid labeled images") {
    const auto corpus = fpqe::synth::make_corpus({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 3, 7);
    REQUIRE(corpus.size() == 30);
    for (const auto& li : corpus) {
        REQUIRE(li.pixels.shape == std::vector<std::int64_t>{1, 28, 28});
        for (double v : li.pixels.data) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
            // byte-quantized values survive the idx round trip losslessly
            REQUIRE(v == std::round(v * 255.0) / 255.0);
        }
        double ink = 0.0;
        for (double v : li.pixels.data) ink += v;
        REQUIRE(ink > 5.0);  // something was drawn
    }
}
