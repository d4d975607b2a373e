#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpqe/common.hpp"
#include "fpqe/rng.hpp"

// Exact statevector simulation. Qubit 0 is the most significant bit of the
// basis index, so |10> on two qubits is index 2 (qubit 0 = 1, qubit 1 = 0).

namespace fpqe::q {

using cplx = std::complex<double>;

struct StateVector {
    int n_qubits = 0;
    std::vector<cplx> amps;

    static StateVector zero_state(int n) {
        if (n < 1) throw ConfigError("state needs at least one qubit");
        StateVector s;
        s.n_qubits = n;
        s.amps.assign(std::size_t{1} << n, cplx{0.0, 0.0});
        s.amps[0] = cplx{1.0, 0.0};
        return s;
    }

    double norm_sq() const {
        double acc = 0.0;
        for (const auto& a : amps) acc += std::norm(a);
        return acc;
    }

    std::size_t dim() const { return amps.size(); }
};

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline int log2_exact(std::size_t n) {
    int k = 0;
    while ((std::size_t{1} << k) < n) ++k;
    return k;
}

// Loads a unit-norm real vector of length 2^n into the amplitudes of an
// n-qubit register.
inline StateVector amplitude_encode(std::span<const double> psi) {
    if (!is_power_of_two(psi.size()) || psi.size() < 2) {
        throw ConfigError("amplitude_encode needs a power-of-two length >= 2, got " +
                          std::to_string(psi.size()));
    }
    double nrm = 0.0;
    for (double v : psi) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (std::abs(nrm - 1.0) > 1e-9) {
        throw DegenerateInputError("amplitude_encode input norm " + std::to_string(nrm) +
                                   " is not 1 within 1e-9");
    }
    StateVector s;
    s.n_qubits = log2_exact(psi.size());
    s.amps.resize(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) s.amps[i] = cplx{psi[i], 0.0};
    return s;
}

namespace detail {

inline std::size_t qubit_mask(const StateVector& s, int qubit) {
    if (qubit < 0 || qubit >= s.n_qubits) {
        throw ConfigError("qubit index " + std::to_string(qubit) + " out of range for " +
                          std::to_string(s.n_qubits) + " qubits");
    }
    return std::size_t{1} << (s.n_qubits - 1 - qubit);
}

inline void apply_single_qubit(StateVector& s, int qubit, cplx u00, cplx u01, cplx u10, cplx u11) {
    const std::size_t mask = qubit_mask(s, qubit);
    const std::size_t n = s.amps.size();
    for (std::size_t i = 0; i < n; ++i) {
        if ((i & mask) == 0) {
            const cplx a = s.amps[i];
            const cplx b = s.amps[i | mask];
            s.amps[i] = u00 * a + u01 * b;
            s.amps[i | mask] = u10 * a + u11 * b;
        }
    }
}

}  // namespace detail

inline void apply_ry(StateVector& s, int qubit, double theta) {
    const double c = std::cos(theta / 2.0), sn = std::sin(theta / 2.0);
    detail::apply_single_qubit(s, qubit, cplx{c, 0}, cplx{-sn, 0}, cplx{sn, 0}, cplx{c, 0});
}

inline void apply_rz(StateVector& s, int qubit, double theta) {
    const cplx e0 = std::exp(cplx{0.0, -theta / 2.0});
    const cplx e1 = std::exp(cplx{0.0, theta / 2.0});
    detail::apply_single_qubit(s, qubit, e0, cplx{0, 0}, cplx{0, 0}, e1);
}

inline void apply_z(StateVector& s, int qubit) {
    const std::size_t mask = detail::qubit_mask(s, qubit);
    for (std::size_t i = 0; i < s.amps.size(); ++i) {
        if (i & mask) s.amps[i] = -s.amps[i];
    }
}

inline void apply_cnot(StateVector& s, int control, int target) {
    if (control == target) throw ConfigError("cnot control equals target");
    const std::size_t cm = detail::qubit_mask(s, control);
    const std::size_t tm = detail::qubit_mask(s, target);
    for (std::size_t i = 0; i < s.amps.size(); ++i) {
        if ((i & cm) && !(i & tm)) std::swap(s.amps[i], s.amps[i | tm]);
    }
}

// Tagged gate description; lets circuits be stored and replayed.
struct Gate {
    enum class Kind { RY, RZ, CNOT } kind;
    int q0 = 0;      // rotation target, or cnot control
    int q1 = 0;      // cnot target
    double theta = 0.0;

    static Gate ry(int q, double t) { return {Kind::RY, q, 0, t}; }
    static Gate rz(int q, double t) { return {Kind::RZ, q, 0, t}; }
    static Gate cnot(int c, int t) { return {Kind::CNOT, c, t, 0.0}; }
};

inline void apply_gate(StateVector& s, const Gate& g) {
    switch (g.kind) {
        case Gate::Kind::RY: apply_ry(s, g.q0, g.theta); break;
        case Gate::Kind::RZ: apply_rz(s, g.q0, g.theta); break;
        case Gate::Kind::CNOT: apply_cnot(s, g.q0, g.q1); break;
    }
}

// <Z> on one qubit: signed probability difference between its 0 and 1 outcomes.
inline double expect_z(const StateVector& s, int qubit = 0) {
    const std::size_t mask = detail::qubit_mask(s, qubit);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.amps.size(); ++i) {
        const double p = std::norm(s.amps[i]);
        acc += (i & mask) ? -p : p;
    }
    return acc;
}

inline double expect_z_mean(const StateVector& s) {
    double acc = 0.0;
    for (int q = 0; q < s.n_qubits; ++q) acc += expect_z(s, q);
    return acc / static_cast<double>(s.n_qubits);
}

enum class Readout { QubitZero, MeanAllQubits };

inline double expect_readout(const StateVector& s, Readout mode) {
    return mode == Readout::QubitZero ? expect_z(s, 0) : expect_z_mean(s);
}

// Applies Z summed/averaged per the readout mode, as a linear operator.
inline void apply_readout_observable(StateVector& s, Readout mode) {
    if (mode == Readout::QubitZero) {
        apply_z(s, 0);
        return;
    }
    StateVector acc = s;
    for (auto& a : acc.amps) a = cplx{0, 0};
    for (int q = 0; q < s.n_qubits; ++q) {
        StateVector tmp = s;
        apply_z(tmp, q);
        for (std::size_t i = 0; i < acc.amps.size(); ++i) acc.amps[i] += tmp.amps[i];
    }
    const double inv = 1.0 / static_cast<double>(s.n_qubits);
    for (std::size_t i = 0; i < s.amps.size(); ++i) s.amps[i] = acc.amps[i] * inv;
}

// Finite-shot <Z> estimate; measurement-only utility, training always uses
// exact expectations.
inline double sample_expect_z(const StateVector& s, int qubit, int shots, Rng& rng) {
    if (shots < 1) throw ConfigError("sample_expect_z needs at least one shot");
    const std::size_t mask = detail::qubit_mask(s, qubit);
    double p_one = 0.0;
    for (std::size_t i = 0; i < s.amps.size(); ++i) {
        if (i & mask) p_one += std::norm(s.amps[i]);
    }
    int ones = 0;
    for (int t = 0; t < shots; ++t) {
        if (rng.uniform01() < p_one) ++ones;
    }
    return 1.0 - 2.0 * static_cast<double>(ones) / static_cast<double>(shots);
}

// ---------------------------------------------------------------------------
// Hardware-efficient ansatz: depth repetitions of RY+RZ on every qubit
// followed by a CNOT ring q -> (q+1 mod n). Angles are stored unreduced.
// ---------------------------------------------------------------------------

struct PqcParams {
    int n_qubits = 0;
    int depth = 0;
    std::vector<double> angles;  // [depth][qubit][2], index 0 = RY, 1 = RZ

    static PqcParams zeros(int n, int depth) {
        if (n < 1 || depth < 0) throw ConfigError("pqc needs n >= 1 and depth >= 0");
        PqcParams p;
        p.n_qubits = n;
        p.depth = depth;
        p.angles.assign(static_cast<std::size_t>(depth) * n * 2, 0.0);
        return p;
    }

    std::size_t angle_index(int d, int qubit, int which) const {
        return (static_cast<std::size_t>(d) * n_qubits + qubit) * 2 + which;
    }
    double ry_angle(int d, int qubit) const { return angles[angle_index(d, qubit, 0)]; }
    double rz_angle(int d, int qubit) const { return angles[angle_index(d, qubit, 1)]; }
    std::size_t num_angles() const { return angles.size(); }
};

inline void apply_pqc(StateVector& s, const PqcParams& p) {
    if (p.n_qubits != s.n_qubits) {
        throw ConfigError("pqc qubit count " + std::to_string(p.n_qubits) +
                          " does not match state " + std::to_string(s.n_qubits));
    }
    for (int d = 0; d < p.depth; ++d) {
        for (int qb = 0; qb < p.n_qubits; ++qb) apply_ry(s, qb, p.ry_angle(d, qb));
        for (int qb = 0; qb < p.n_qubits; ++qb) apply_rz(s, qb, p.rz_angle(d, qb));
        if (p.n_qubits > 1) {
            for (int qb = 0; qb < p.n_qubits; ++qb) apply_cnot(s, qb, (qb + 1) % p.n_qubits);
        }
    }
}

inline void apply_pqc_inverse(StateVector& s, const PqcParams& p) {
    if (p.n_qubits != s.n_qubits) {
        throw ConfigError("pqc qubit count does not match state");
    }
    for (int d = p.depth - 1; d >= 0; --d) {
        if (p.n_qubits > 1) {
            for (int qb = p.n_qubits - 1; qb >= 0; --qb) apply_cnot(s, qb, (qb + 1) % p.n_qubits);
        }
        for (int qb = p.n_qubits - 1; qb >= 0; --qb) apply_rz(s, qb, -p.rz_angle(d, qb));
        for (int qb = p.n_qubits - 1; qb >= 0; --qb) apply_ry(s, qb, -p.ry_angle(d, qb));
    }
}

}  // namespace fpqe::q
