#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "fpqe/autoencoder.hpp"
#include "fpqe/qnn.hpp"
#include "fpqe/rng.hpp"
#include "fpqe/synthdata.hpp"
#include "support/oracles.hpp"

using fpqe::AutoencoderModel;
using fpqe::EncoderConfig;
using fpqe::Tensor;

namespace {

EncoderConfig mnist_config(std::vector<std::int64_t> channels = {16, 32, 8}) {
    EncoderConfig cfg;
    cfg.in_channels = 1;
    cfg.in_h = 28;
    cfg.in_w = 28;
    cfg.blocks.clear();
    for (auto c : channels) cfg.blocks.push_back({c, 3, 2, 1});
    return cfg;
}

std::vector<Tensor> small_corpus(int per_class, std::uint64_t seed) {
    std::vector<Tensor> out;
    for (const auto& li : fpqe::synth::make_corpus({0, 1}, per_class, seed)) {
        out.push_back(li.pixels);
    }
    return out;
}

}  // namespace

TEST_CASE("encoder config shape arithmetic") {
    const EncoderConfig cfg = mnist_config();
    const auto chain = cfg.spatial_chain();
    REQUIRE(chain.size() == 4);
    REQUIRE(chain[1] == std::pair<std::int64_t, std::int64_t>{14, 14});
    REQUIRE(chain[2] == std::pair<std::int64_t, std::int64_t>{7, 7});
    REQUIRE(chain[3] == std::pair<std::int64_t, std::int64_t>{4, 4});

    EncoderConfig cifar = cfg;
    cifar.in_channels = 3;
    cifar.in_h = cifar.in_w = 32;
    REQUIRE(cifar.latent_hw() == std::pair<std::int64_t, std::int64_t>{4, 4});

    EncoderConfig bad = cfg;
    bad.blocks[1].kernel = 99;
    try {
        bad.spatial_chain();
        FAIL("expected a config error");
    } catch (const fpqe::ConfigError& e) {
        REQUIRE(std::string(e.what()).find("block 1") != std::string::npos);
    }

    // Channel growth is fine (the 64-channel latent is standard), but a block
    // stack that never shrinks the plane is not a compression.
    REQUIRE_NOTHROW(mnist_config({64, 64, 64}).validate());
    EncoderConfig flat = mnist_config({8});
    flat.blocks[0].stride = 1;
    REQUIRE_THROWS_AS(flat.validate(), fpqe::ConfigError);
}

TEST_CASE("decoder mirrors the encoder back to the input shape") {
    auto m = fpqe::build_autoencoder(mnist_config(), 0);
    fpqe::Rng rng(50);
    const Tensor x = oracle::random_tensor({1, 28, 28}, rng, 0.0, 1.0);
    const Tensor recon = fpqe::reconstruct(m, x);
    REQUIRE(recon.shape == x.shape);
    REQUIRE(recon.all_finite());

    // Property over a few valid configs: encode-decode returns the input shape.
    for (std::uint64_t trial = 0; trial < 4; ++trial) {
        fpqe::Rng cr(trial + 100);
        EncoderConfig cfg;
        cfg.in_channels = 1;
        cfg.in_h = 16 + static_cast<std::int64_t>(cr.below(17));  // 16..32
        cfg.in_w = 16 + static_cast<std::int64_t>(cr.below(17));
        cfg.blocks = {{4, 3, 2, 1}, {6, 3, 2, 1}};
        auto model = fpqe::build_autoencoder(cfg, trial);
        const Tensor probe = oracle::random_tensor({1, cfg.in_h, cfg.in_w}, cr, 0.0, 1.0);
        REQUIRE(fpqe::reconstruct(model, probe).shape == probe.shape);
    }
}

TEST_CASE("same seed gives bit-identical parameters") {
    auto a = fpqe::build_autoencoder(mnist_config(), 7);
    auto b = fpqe::build_autoencoder(mnist_config(), 7);
    auto c = fpqe::build_autoencoder(mnist_config(), 8);
    REQUIRE(a.encoder[0].weight.value().data == b.encoder[0].weight.value().data);
    REQUIRE(a.decoder[2].weight.value().data == b.decoder[2].weight.value().data);
    REQUIRE(a.encoder[0].weight.value().data != c.encoder[0].weight.value().data);
}

TEST_CASE("training reduces the loss and respects epoch accounting") {
    EncoderConfig cfg = mnist_config({4, 8, 4});
    auto m = fpqe::build_autoencoder(cfg, 1);
    auto images = small_corpus(10, 3);

    SECTION("zero epochs leaves the model untouched") {
        const Tensor before = m.encoder[0].weight.value();
        const auto report = fpqe::train_autoencoder(m, images, 0, 1e-3, 8, 0);
        REQUIRE(report.epoch_mse.empty());
        REQUIRE(m.encoder[0].weight.value().data == before.data);
    }
    SECTION("training is seed-deterministic and loss goes down") {
        auto m2 = fpqe::build_autoencoder(cfg, 1);
        const auto r1 = fpqe::train_autoencoder(m, images, 4, 1e-3, 8, 5);
        const auto r2 = fpqe::train_autoencoder(m2, images, 4, 1e-3, 8, 5);
        REQUIRE(r1.epoch_mse == r2.epoch_mse);
        REQUIRE(r1.epoch_mse.size() == 4);
        REQUIRE(r1.final_mse <= r1.initial_mse);
    }
    SECTION("a single repeated image is memorized") {
        std::vector<Tensor> one(24, images.front());
        auto tiny = fpqe::build_autoencoder(mnist_config({8, 16, 8}), 2);
        const auto report = fpqe::train_autoencoder(tiny, one, 150, 3e-3, 8, 0);
        REQUIRE(report.final_mse < 1e-3);
    }
    SECTION("empty dataset rejected") {
        REQUIRE_THROWS_AS(fpqe::train_autoencoder(m, {}, 1, 1e-3, 8, 0), fpqe::ConfigError);
    }
}

TEST_CASE("freezing locks the encoder") {
    auto m = fpqe::build_autoencoder(mnist_config({4, 8, 4}), 3);
    auto images = small_corpus(6, 9);
    fpqe::train_autoencoder(m, images, 2, 1e-3, 6, 1);
    auto frozen = fpqe::freeze_encoder(m);
    REQUIRE(m.frozen);
    REQUIRE_THROWS_AS(fpqe::train_autoencoder(m, images, 1, 1e-3, 6, 0), fpqe::ConfigError);

    const Tensor before = frozen.encode(images[0]);

    // Downstream training touches only QNN angles; the encoding cannot move.
    std::vector<fpqe::q::QnnSample> samples;
    for (const auto& img : images) {
        samples.push_back({frozen.fpqe_encode(img), 0});
    }
    auto qnn = fpqe::q::build_qnn(static_cast<int>(samples[0].rows.shape[0]),
                                  static_cast<int>(samples[0].rows.shape[1]), {4, 2}, 1,
                                  fpqe::q::Readout::QubitZero, 0);
    fpqe::q::qnn_train(qnn, samples, 10, 0.05, 6, 0);
    const Tensor after = frozen.encode(images[0]);
    REQUIRE(before.data == after.data);
}

TEST_CASE("frozen encoder round-trips through its checkpoint bit-exactly") {
    std::filesystem::create_directories("test_tmp");
    auto m = fpqe::build_autoencoder(mnist_config({4, 8, 4}), 4);
    auto images = small_corpus(6, 11);
    fpqe::train_autoencoder(m, images, 2, 1e-3, 6, 2);
    auto frozen = fpqe::freeze_encoder(m);
    frozen.save("test_tmp/frozen_ck");
    const auto loaded = fpqe::FrozenEncoder::load("test_tmp/frozen_ck");
    const Tensor a = frozen.encode(images[0]);
    const Tensor b = loaded.encode(images[0]);
    REQUIRE(a.data == b.data);
}

TEST_CASE("autoencoder checkpoint restores reconstruction exactly") {
    std::filesystem::create_directories("test_tmp");
    auto m = fpqe::build_autoencoder(mnist_config({4, 8, 4}), 5);
    auto images = small_corpus(6, 13);
    fpqe::train_autoencoder(m, images, 2, 1e-3, 6, 3);
    fpqe::save_autoencoder("test_tmp/ae_ck", m);
    auto loaded = fpqe::load_autoencoder("test_tmp/ae_ck");
    REQUIRE(loaded.frozen == m.frozen);
    const Tensor a = fpqe::reconstruct(m, images[1]);
    const Tensor b = fpqe::reconstruct(loaded, images[1]);
    REQUIRE(a.data == b.data);

    const Tensor c = fpqe::reconstruct(loaded, images[1]);
    REQUIRE(b.data == c.data);  // eval-mode batch norm is deterministic
}

TEST_CASE("fpqe_encode emits unit-norm power-of-two rows") {
    auto m = fpqe::build_autoencoder(mnist_config({4, 8, 4}), 6);
    auto frozen = fpqe::freeze_encoder(m);
    const Tensor rows = frozen.fpqe_encode(small_corpus(1, 17)[0]);
    REQUIRE(rows.shape == std::vector<std::int64_t>{4, 16});
    for (std::int64_t k = 0; k < rows.shape[0]; ++k) {
        double nrm = 0.0;
        for (std::int64_t j = 0; j < rows.shape[1]; ++j) nrm += rows.at2(k, j) * rows.at2(k, j);
        REQUIRE_THAT(std::sqrt(nrm), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("table-style 64x64 latent configuration") {
    // Two stride-2 blocks with paddings 1 and 2 take 28 -> 14 -> 8, so the
    // latent is 64 channels of 64 elements each: a 6-qubit register per row.
    EncoderConfig cfg;
    cfg.in_channels = 1;
    cfg.in_h = cfg.in_w = 28;
    cfg.blocks = {{32, 3, 2, 1}, {64, 3, 2, 2}};
    auto m = fpqe::build_autoencoder(cfg, 0);
    auto frozen = fpqe::freeze_encoder(m);
    const Tensor rows = frozen.fpqe_encode(small_corpus(1, 19)[0]);
    REQUIRE(rows.shape == std::vector<std::int64_t>{64, 64});
    REQUIRE(fpqe::q::amplitude_encode(
                std::span<const double>(rows.data.data(), 64))
                .n_qubits == 6);
}

TEST_CASE("per-channel normalization is scale invariant for homogeneous encoders") {
    // Without batch norm the block stack is conv -> relu -> conv: positively
    // homogeneous once biases vanish, so scaling the input cancels out.
    EncoderConfig cfg;
    cfg.in_channels = 1;
    cfg.in_h = cfg.in_w = 16;
    cfg.blocks = {{4, 3, 2, 1}, {4, 3, 2, 1}};
    cfg.use_batchnorm = false;
    auto m = fpqe::build_autoencoder(cfg, 9);
    for (auto& l : m.encoder) {
        for (double& v : l.bias.value_mut().data) v = 0.0;
    }
    auto frozen = fpqe::freeze_encoder(m);

    fpqe::Rng rng(51);
    const Tensor x = oracle::random_tensor({1, 16, 16}, rng, 0.1, 1.0);
    Tensor x2 = x;
    for (double& v : x2.data) v *= 2.0;
    const Tensor r1 = frozen.fpqe_encode(x);
    const Tensor r2 = frozen.fpqe_encode(x2);
    for (std::int64_t i = 0; i < r1.size(); ++i) {
        REQUIRE_THAT(r1[i], Catch::Matchers::WithinAbs(r2[i], 1e-12));
    }
}

TEST_CASE("full encoder-decoder gradient matches finite differences") {
    EncoderConfig cfg;
    cfg.in_channels = 1;
    cfg.in_h = cfg.in_w = 8;
    cfg.blocks = {{2, 3, 2, 1}, {3, 3, 2, 1}};
    auto m = fpqe::build_autoencoder(cfg, 12);
    fpqe::Rng rng(52);
    const Tensor batch = oracle::random_tensor({2, 1, 8, 8}, rng, 0.0, 1.0);

    auto build = [&]() {
        fpqe::ad::Var x(batch);
        auto latent = fpqe::detail::encoder_forward(m, x, true);
        auto recon = fpqe::detail::decoder_forward(m, latent, true);
        return fpqe::ad::mse_loss(recon, x);
    };
    fpqe::ad::Var loss = build();
    fpqe::ad::backward(loss);

    auto params = m.trainable_params();
    fpqe::Rng pick(53);
    const double h = 1e-4;
    int checked = 0;
    while (checked < 20) {
        auto& leaf = params[pick.below(params.size())];
        const std::int64_t i =
            static_cast<std::int64_t>(pick.below(static_cast<std::uint64_t>(leaf.value().size())));
        const double analytic = leaf.grad()[i];
        const double orig = leaf.value()[i];
        leaf.value_mut()[i] = orig + h;
        const double up = build().value()[0];
        leaf.value_mut()[i] = orig - h;
        const double down = build().value()[0];
        leaf.value_mut()[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-4});
        REQUIRE(std::abs(analytic - fd) / scale < 1e-3);
        ++checked;
    }
}
