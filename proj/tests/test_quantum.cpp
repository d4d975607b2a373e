#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "fpqe/quantum.hpp"
#include "fpqe/rng.hpp"
#include "support/oracles.hpp"

namespace q = fpqe::q;
using q::StateVector;

namespace {

q::Gate random_gate(int n_qubits, fpqe::Rng& rng) {
    const int pick = static_cast<int>(rng.below(n_qubits > 1 ? 3 : 2));
    const int qa = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_qubits)));
    switch (pick) {
        case 0: return q::Gate::ry(qa, rng.uniform(-3.0, 3.0));
        case 1: return q::Gate::rz(qa, rng.uniform(-3.0, 3.0));
        default: {
            int qb = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_qubits)));
            while (qb == qa) qb = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_qubits)));
            return q::Gate::cnot(qa, qb);
        }
    }
}

StateVector random_state(int n_qubits, fpqe::Rng& rng) {
    StateVector s = StateVector::zero_state(n_qubits);
    for (auto& a : s.amps) a = q::cplx{rng.normal(), rng.normal()};
    double norm = std::sqrt(s.norm_sq());
    for (auto& a : s.amps) a /= norm;
    return s;
}

}  // namespace

TEST_CASE("amplitude_encode basics") {
    const std::vector<double> basis = {1.0, 0.0, 0.0, 0.0};
    const StateVector s = q::amplitude_encode(basis);
    REQUIRE(s.n_qubits == 2);
    REQUIRE(s.amps[0] == q::cplx{1.0, 0.0});
    for (std::size_t i = 1; i < 4; ++i) REQUIRE(s.amps[i] == q::cplx{0.0, 0.0});

    const std::vector<double> uniform = {0.5, 0.5, 0.5, 0.5};
    const StateVector u = q::amplitude_encode(uniform);
    REQUIRE_THAT(u.norm_sq(), Catch::Matchers::WithinAbs(1.0, 1e-12));

    std::vector<double> v64(64, 1.0 / 8.0);
    REQUIRE(q::amplitude_encode(v64).n_qubits == 6);

    std::vector<double> v3 = {1.0, 0.0, 0.0};
    REQUIRE_THROWS_AS(q::amplitude_encode(v3), fpqe::ConfigError);
    std::vector<double> not_unit = {0.5, 0.5, 0.5, 0.6};
    REQUIRE_THROWS_AS(q::amplitude_encode(not_unit), fpqe::DegenerateInputError);
}

TEST_CASE("single-gate actions") {
    StateVector s = StateVector::zero_state(1);
    q::apply_ry(s, 0, fpqe::kPi);
    REQUIRE_THAT(std::abs(s.amps[1]), Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(std::abs(s.amps[0]), Catch::Matchers::WithinAbs(0.0, 1e-12));

    // |10> means qubit0 = 1; CNOT(0,1) flips qubit 1 giving |11>.
    StateVector c = StateVector::zero_state(2);
    c.amps[0] = {0.0, 0.0};
    c.amps[2] = {1.0, 0.0};
    q::apply_cnot(c, 0, 1);
    REQUIRE_THAT(std::abs(c.amps[3]), Catch::Matchers::WithinAbs(1.0, 1e-12));

    REQUIRE_THROWS_AS(q::apply_cnot(c, 0, 0), fpqe::ConfigError);
    REQUIRE_THROWS_AS(q::apply_ry(c, 5, 0.1), fpqe::ConfigError);
}

TEST_CASE("random circuits match the dense-matrix oracle") {
    fpqe::Rng rng(31);
    for (int n = 1; n <= 4; ++n) {
        for (int trial = 0; trial < 25; ++trial) {
            StateVector s = random_state(n, rng);
            std::vector<oracle::cd> dense(s.amps.begin(), s.amps.end());
            for (int g = 0; g < 12; ++g) {
                const q::Gate gate = random_gate(n, rng);
                q::apply_gate(s, gate);
                dense = oracle::apply_gate_dense(dense, gate, n);
            }
            for (std::size_t i = 0; i < s.amps.size(); ++i) {
                REQUIRE_THAT(std::abs(s.amps[i] - dense[i]),
                             Catch::Matchers::WithinAbs(0.0, 1e-10));
            }
            REQUIRE_THAT(s.norm_sq(), Catch::Matchers::WithinAbs(1.0, 1e-12));
        }
    }
}

TEST_CASE("expect_z closed forms") {
    StateVector zero = StateVector::zero_state(3);
    REQUIRE(q::expect_z(zero) == 1.0);

    StateVector ones = StateVector::zero_state(3);
    ones.amps[0] = {0.0, 0.0};
    ones.amps[7] = {1.0, 0.0};
    REQUIRE(q::expect_z(ones) == -1.0);

    for (double theta : {0.3, 1.2, 2.9}) {
        StateVector s = StateVector::zero_state(1);
        q::apply_ry(s, 0, theta);
        REQUIRE_THAT(q::expect_z(s), Catch::Matchers::WithinAbs(std::cos(theta), 1e-12));
    }

    fpqe::Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        StateVector s = random_state(3, rng);
        const double got = q::expect_z(s, 1);
        std::vector<oracle::cd> dense(s.amps.begin(), s.amps.end());
        REQUIRE_THAT(got, Catch::Matchers::WithinAbs(oracle::expect_z_dense(dense, 3, 1), 1e-10));
        REQUIRE(got >= -1.0);
        REQUIRE(got <= 1.0);
    }
}

TEST_CASE("pqc structure and unitarity") {
    SECTION("depth 0 is the identity") {
        fpqe::Rng rng(33);
        StateVector s = random_state(3, rng);
        const StateVector before = s;
        q::apply_pqc(s, q::PqcParams::zeros(3, 0));
        for (std::size_t i = 0; i < s.amps.size(); ++i) REQUIRE(s.amps[i] == before.amps[i]);
    }
    SECTION("zero angles leave only the CNOT rings") {
        fpqe::Rng rng(34);
        StateVector s = random_state(3, rng);
        std::vector<oracle::cd> dense(s.amps.begin(), s.amps.end());
        const auto params = q::PqcParams::zeros(3, 2);
        q::apply_pqc(s, params);
        for (const auto& gate : oracle::pqc_gate_list(params)) {
            dense = oracle::apply_gate_dense(dense, gate, 3);
        }
        for (std::size_t i = 0; i < s.amps.size(); ++i) {
            REQUIRE_THAT(std::abs(s.amps[i] - dense[i]), Catch::Matchers::WithinAbs(0.0, 1e-10));
        }
    }
    SECTION("random angles preserve the norm and match the oracle") {
        fpqe::Rng rng(35);
        for (int n = 1; n <= 4; ++n) {
            auto params = q::PqcParams::zeros(n, 2);
            for (auto& a : params.angles) a = rng.uniform(-3.0, 3.0);
            StateVector s = random_state(n, rng);
            std::vector<oracle::cd> dense(s.amps.begin(), s.amps.end());
            q::apply_pqc(s, params);
            for (const auto& gate : oracle::pqc_gate_list(params)) {
                dense = oracle::apply_gate_dense(dense, gate, n);
            }
            REQUIRE_THAT(s.norm_sq(), Catch::Matchers::WithinAbs(1.0, 1e-12));
            for (std::size_t i = 0; i < s.amps.size(); ++i) {
                REQUIRE_THAT(std::abs(s.amps[i] - dense[i]),
                             Catch::Matchers::WithinAbs(0.0, 1e-10));
            }
        }
    }
    SECTION("inverse undoes the circuit") {
        fpqe::Rng rng(36);
        auto params = q::PqcParams::zeros(4, 3);
        for (auto& a : params.angles) a = rng.uniform(-3.0, 3.0);
        StateVector s = random_state(4, rng);
        const StateVector before = s;
        q::apply_pqc(s, params);
        q::apply_pqc_inverse(s, params);
        for (std::size_t i = 0; i < s.amps.size(); ++i) {
            REQUIRE_THAT(std::abs(s.amps[i] - before.amps[i]),
                         Catch::Matchers::WithinAbs(0.0, 1e-12));
        }
    }
    SECTION("qubit mismatch rejected") {
        StateVector s = StateVector::zero_state(2);
        REQUIRE_THROWS_AS(q::apply_pqc(s, q::PqcParams::zeros(3, 1)), fpqe::ConfigError);
    }
}

TEST_CASE("readout variants") {
    StateVector s = StateVector::zero_state(2);
    q::apply_ry(s, 1, fpqe::kPi);  // qubit 0 stays |0>, qubit 1 flips
    REQUIRE_THAT(q::expect_z(s, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(q::expect_z(s, 1), Catch::Matchers::WithinAbs(-1.0, 1e-12));
    REQUIRE_THAT(q::expect_z_mean(s), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("finite-shot z estimates converge to the expectation") {
    StateVector s = StateVector::zero_state(1);
    q::apply_ry(s, 0, 1.1);
    fpqe::Rng rng(37);
    const double est = q::sample_expect_z(s, 0, 20000, rng);
    REQUIRE_THAT(est, Catch::Matchers::WithinAbs(std::cos(1.1), 0.03));
    REQUIRE_THROWS_AS(q::sample_expect_z(s, 0, 0, rng), fpqe::ConfigError);
}
