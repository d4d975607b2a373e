#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fpqe/qnn.hpp"
#include "fpqe/rng.hpp"
#include "support/oracles.hpp"

namespace q = fpqe::q;
using fpqe::Tensor;

namespace {

Tensor unit_rows(std::vector<std::vector<double>> rows) {
    const std::int64_t c = static_cast<std::int64_t>(rows.size());
    const std::int64_t len = static_cast<std::int64_t>(rows.front().size());
    Tensor t({c, len});
    for (std::int64_t i = 0; i < c; ++i) {
        double nrm = 0.0;
        for (double v : rows[static_cast<std::size_t>(i)]) nrm += v * v;
        nrm = std::sqrt(nrm);
        for (std::int64_t j = 0; j < len; ++j) {
            t.at2(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] / nrm;
        }
    }
    return t;
}

double loss_logit0(const Tensor& logits, Tensor& dlogits) {
    dlogits = Tensor(logits.shape, 0.0);
    dlogits[0] = 1.0;
    return logits[0];
}

}  // namespace

TEST_CASE("build_qnn channel plans") {
    SECTION("matching channels map one-to-one") {
        const auto m = q::build_qnn(8, 16, {8, 2}, 2, q::Readout::QubitZero, 0);
        REQUIRE(m.layers.size() == 2);
        REQUIRE(m.layers[0].channels.size() == 8);
        for (int k = 0; k < 8; ++k) {
            REQUIRE(m.layers[0].channels[static_cast<std::size_t>(k)].sources ==
                    std::vector<int>{k});
            REQUIRE(m.layers[0].channels[static_cast<std::size_t>(k)].params.n_qubits == 4);
        }
        // 8 measurements grouped into two 4-element registers (2 qubits each).
        REQUIRE(m.layers[1].channels[0].sources == std::vector<int>{0, 1, 2, 3});
        REQUIRE(m.layers[1].channels[1].sources == std::vector<int>{4, 5, 6, 7});
        REQUIRE(m.layers[1].channels[0].params.n_qubits == 2);
    }
    SECTION("single-channel input replicates across the first layer") {
        const auto m = q::build_qnn(1, 16, {4, 2}, 2, q::Readout::QubitZero, 0);
        for (const auto& ch : m.layers[0].channels) {
            REQUIRE(ch.sources == std::vector<int>{0});
            REQUIRE(ch.params.n_qubits == 4);
        }
        REQUIRE(m.layers[1].channels[0].sources == std::vector<int>{0, 1});
        REQUIRE(m.layers[1].channels[0].padded_len == 2);
    }
    SECTION("uneven grouping pads to the next power of two") {
        const auto m = q::build_qnn(9, 2, {9, 2}, 1, q::Readout::QubitZero, 0);
        REQUIRE(m.layers[1].channels[0].sources.size() == 5);
        REQUIRE(m.layers[1].channels[1].sources.size() == 4);
        REQUIRE(m.layers[1].channels[0].padded_len == 8);
        REQUIRE(m.layers[1].channels[1].padded_len == 4);
    }
    SECTION("invalid input geometry rejected") {
        REQUIRE_THROWS_AS(q::build_qnn(4, 12, {4, 2}, 2, q::Readout::QubitZero, 0),
                          fpqe::ConfigError);
        REQUIRE_THROWS_AS(q::build_qnn(4, 16, {}, 2, q::Readout::QubitZero, 0),
                          fpqe::ConfigError);
    }
}

TEST_CASE("qnn_forward with zero angles matches a CNOT-ring oracle") {
    auto m = q::build_qnn(2, 4, {2}, 1, q::Readout::QubitZero, 0);
    for (auto& l : m.layers)
        for (auto& ch : l.channels)
            for (auto& a : ch.params.angles) a = 0.0;
    const Tensor psi = unit_rows({{1.0, 2.0, 0.5, -1.0}, {0.25, 0.0, 1.0, 0.75}});

    const Tensor logits = q::qnn_forward(m, psi);
    for (std::int64_t k = 0; k < 2; ++k) {
        std::vector<oracle::cd> dense;
        for (std::int64_t j = 0; j < 4; ++j) dense.push_back({psi.at2(k, j), 0.0});
        for (const auto& gate : oracle::pqc_gate_list(m.layers[0].channels[0].params)) {
            dense = oracle::apply_gate_dense(dense, gate, 2);
        }
        REQUIRE_THAT(logits[k],
                     Catch::Matchers::WithinAbs(oracle::expect_z_dense(dense, 2, 0), 1e-10));
    }
}

TEST_CASE("qnn_forward logits live in [-1,1]") {
    fpqe::Rng rng(41);
    auto m = q::build_qnn(4, 8, {4, 2}, 2, q::Readout::QubitZero, 5);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor psi({4, 8});
        for (double& v : psi.data) v = rng.uniform(-1.0, 1.0);
        for (std::int64_t k = 0; k < 4; ++k) {
            double nrm = 0.0;
            for (std::int64_t j = 0; j < 8; ++j) nrm += psi.at2(k, j) * psi.at2(k, j);
            nrm = std::sqrt(nrm);
            for (std::int64_t j = 0; j < 8; ++j) psi.at2(k, j) /= nrm;
        }
        const Tensor logits = q::qnn_forward(m, psi);
        for (std::int64_t k = 0; k < logits.size(); ++k) {
            REQUIRE(logits[k] >= -1.0 - 1e-12);
            REQUIRE(logits[k] <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("permuting channels with their parameters permutes the measurements") {
    fpqe::Rng rng(42);
    auto m = q::build_qnn(3, 4, {3}, 2, q::Readout::QubitZero, 7);
    Tensor psi = unit_rows({{1, 0, 0.5, 0.25}, {0, 1, -0.5, 0.3}, {0.7, 0.7, 0.1, -0.2}});
    const Tensor base = q::qnn_forward(m, psi);

    auto swapped = m;
    std::swap(swapped.layers[0].channels[0].params, swapped.layers[0].channels[1].params);
    Tensor psi_swapped = psi;
    for (std::int64_t j = 0; j < 4; ++j) {
        std::swap(psi_swapped.at2(0, j), psi_swapped.at2(1, j));
    }
    const Tensor out = q::qnn_forward(swapped, psi_swapped);
    REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(base[1], 1e-12));
    REQUIRE_THAT(out[1], Catch::Matchers::WithinAbs(base[0], 1e-12));
    REQUIRE_THAT(out[2], Catch::Matchers::WithinAbs(base[2], 1e-12));
}

TEST_CASE("parameter shift recovers -sin(theta) for a single RY") {
    auto m = q::build_qnn(1, 2, {1}, 1, q::Readout::QubitZero, 0);
    auto& params = m.layers[0].channels[0].params;
    params.angles[params.angle_index(0, 0, 0)] = fpqe::kPi / 2.0;  // RY
    params.angles[params.angle_index(0, 0, 1)] = 0.0;              // RZ
    const Tensor psi = unit_rows({{1.0, 0.0}});
    const auto grad = q::parameter_shift_grad(m, psi, loss_logit0);
    REQUIRE(grad.size() == 2);
    REQUIRE_THAT(grad[0], Catch::Matchers::WithinAbs(-1.0, 1e-12));  // -sin(pi/2)
    REQUIRE_THAT(grad[1], Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("gradient of an angle-independent loss is zero") {
    fpqe::Rng rng(43);
    auto m = q::build_qnn(2, 4, {2, 2}, 2, q::Readout::QubitZero, 3);
    const Tensor psi = unit_rows({{0.3, -0.4, 0.5, 0.1}, {1.0, 0.2, 0.0, -0.3}});
    const auto grad = q::parameter_shift_grad(
        m, psi, [](const Tensor& logits, Tensor& dlogits) {
            dlogits = Tensor(logits.shape, 0.0);
            return 0.75;
        });
    for (double g : grad) REQUIRE(g == 0.0);
}

TEST_CASE("two-layer parameter-shift gradients match finite differences") {
    fpqe::Rng rng(44);
    auto m = q::build_qnn(4, 4, {4, 2}, 2, q::Readout::QubitZero, 9);
    const Tensor psi = unit_rows({{0.8, -0.1, 0.4, 0.2},
                                  {0.1, 0.9, -0.2, 0.3},
                                  {0.5, 0.5, 0.5, 0.5},
                                  {-0.3, 0.2, 0.7, 0.1}});
    auto loss = [](const Tensor& logits, Tensor& dlogits) {
        return q::softmax_cross_entropy(logits, 1, dlogits);
    };
    const auto grad = q::parameter_shift_grad(m, psi, loss);

    auto ptrs = q::detail::angle_pointers(m);
    REQUIRE(ptrs.size() == grad.size());
    fpqe::Rng pick(45);
    const double h = 1e-5;
    for (int check = 0; check < 20; ++check) {
        const std::size_t idx = pick.below(ptrs.size());
        const double orig = *ptrs[idx];
        Tensor d({2});
        *ptrs[idx] = orig + h;
        Tensor lp({2});
        const double up = q::softmax_cross_entropy(q::qnn_forward(m, psi), 1, lp);
        *ptrs[idx] = orig - h;
        const double down = q::softmax_cross_entropy(q::qnn_forward(m, psi), 1, lp);
        *ptrs[idx] = orig;
        const double fd = (up - down) / (2.0 * h);
        REQUIRE_THAT(grad[idx], Catch::Matchers::WithinAbs(fd, 1e-5));
    }
}

TEST_CASE("qnn_train separates a basis-state toy problem") {
    // Class 0: first basis state; class 1: last. Linearly separable by <Z>.
    std::vector<q::QnnSample> data;
    fpqe::Rng rng(46);
    for (int i = 0; i < 16; ++i) {
        const int label = i % 2;
        std::vector<double> row(4, 0.0);
        row[label == 0 ? 0 : 3] = 1.0;
        // tiny jitter keeps samples distinct
        for (auto& v : row) v += rng.uniform(0.0, 0.05);
        data.push_back({unit_rows({row, row}), label});
    }
    auto m = q::build_qnn(2, 4, {2}, 2, q::Readout::QubitZero, 1);
    const auto trace = q::qnn_train(m, data, 50, 0.1, 8, 1);
    REQUIRE(trace.size() == 50);
    REQUIRE(trace.back().train_accuracy >= 0.95);
}

TEST_CASE("qnn_train with zero epochs leaves the angles alone") {
    auto m = q::build_qnn(2, 4, {2}, 2, q::Readout::QubitZero, 2);
    const auto before = m.layers[0].channels[0].params.angles;
    std::vector<q::QnnSample> data = {{unit_rows({{1, 0, 0, 0}, {0, 1, 0, 0}}), 0}};
    const auto trace = q::qnn_train(m, data, 0, 0.1, 4, 0);
    REQUIRE(trace.empty());
    REQUIRE(m.layers[0].channels[0].params.angles == before);
}

TEST_CASE("qnn_train is deterministic for a fixed seed") {
    std::vector<q::QnnSample> data;
    fpqe::Rng rng(47);
    for (int i = 0; i < 12; ++i) {
        std::vector<double> row = {rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0),
                                   rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)};
        data.push_back({unit_rows({row}), i % 2});
    }
    auto m1 = q::build_qnn(1, 4, {4, 2}, 2, q::Readout::QubitZero, 3);
    auto m2 = q::build_qnn(1, 4, {4, 2}, 2, q::Readout::QubitZero, 3);
    const auto t1 = q::qnn_train(m1, data, 5, 0.05, 4, 11);
    const auto t2 = q::qnn_train(m2, data, 5, 0.05, 4, 11);
    for (std::size_t i = 0; i < t1.size(); ++i) {
        REQUIRE(t1[i].loss == t2[i].loss);
    }
    for (std::size_t l = 0; l < m1.layers.size(); ++l) {
        for (std::size_t c = 0; c < m1.layers[l].channels.size(); ++c) {
            REQUIRE(m1.layers[l].channels[c].params.angles ==
                    m2.layers[l].channels[c].params.angles);
        }
    }
    REQUIRE_THROWS_AS(q::qnn_train(m1, {}, 1, 0.05, 4, 0), fpqe::ConfigError);
}

TEST_CASE("predict breaks ties toward the lower index") {
    auto m = q::build_qnn(2, 4, {2}, 0, q::Readout::QubitZero, 0);
    // depth 0: logits equal the raw <Z> of the encoded rows
    const Tensor psi = unit_rows({{1, 0, 0, 0}, {1, 0, 0, 0}});
    const Tensor logits = q::qnn_forward(m, psi);
    REQUIRE(logits[0] == logits[1]);
    REQUIRE(q::predict(m, psi) == 0);
}

TEST_CASE("predict agrees with the argmax of qnn_forward") {
    fpqe::Rng rng(48);
    auto m = q::build_qnn(2, 4, {2, 2}, 2, q::Readout::QubitZero, 21);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> r0 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                                  rng.uniform(-1, 1)};
        std::vector<double> r1 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                                  rng.uniform(-1, 1)};
        const Tensor psi = unit_rows({r0, r1});
        const Tensor logits = q::qnn_forward(m, psi);
        const int want = logits[0] >= logits[1] ? 0 : 1;
        REQUIRE(q::predict(m, psi) == want);
    }
}

TEST_CASE("degenerate zero-norm channel raises an identifying error") {
    auto m = q::build_qnn(2, 4, {2}, 1, q::Readout::QubitZero, 0);
    Tensor psi({2, 4});
    psi.at2(0, 0) = 1.0;  // row 1 left all-zero
    REQUIRE_THROWS_AS(q::qnn_forward(m, psi), fpqe::DegenerateInputError);
    try {
        q::qnn_forward(m, psi);
    } catch (const fpqe::DegenerateInputError& e) {
        REQUIRE(std::string(e.what()).find("channel 1") != std::string::npos);
    }
}
