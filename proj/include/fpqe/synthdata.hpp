#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fpqe/common.hpp"
#include "fpqe/data.hpp"
#include "fpqe/rng.hpp"
#include "fpqe/tensor.hpp"

// Seeded synthetic handwritten-digit corpus: each class is a set of parametric
// strokes rendered through a signed-distance profile with per-image affine
// jitter. Provides offline 28x28 grayscale data with MNIST-like variability
// for smoke runs and the test suite, emitted through the standard IDX writer.

namespace fpqe::synth {

struct Options {
    std::int64_t height = 28;
    std::int64_t width = 28;
    double jitter = 1.0;  // scales every randomized distortion
};

namespace detail {

struct Pt {
    double x, y;
};

using Polyline = std::vector<Pt>;

inline Polyline arc(double cx, double cy, double rx, double ry, double t0, double t1, int n = 24) {
    Polyline p;
    p.reserve(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        const double t = t0 + (t1 - t0) * static_cast<double>(i) / n;
        p.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
    }
    return p;
}

inline constexpr double kTau = 6.283185307179586;

// Stroke skeletons in a unit box, y growing downward.
inline std::vector<Polyline> digit_strokes(int digit) {
    switch (digit) {
        case 0:
            return {arc(0.50, 0.50, 0.20, 0.30, 0.0, kTau, 40)};
        case 1:
            return {{{0.40, 0.30}, {0.54, 0.16}}, {{0.54, 0.16}, {0.54, 0.84}}};
        case 2:
            return {arc(0.50, 0.34, 0.18, 0.17, -3.14159, 0.35),
                    {{0.682, 0.40}, {0.32, 0.82}},
                    {{0.32, 0.82}, {0.70, 0.82}}};
        case 3:
            return {arc(0.46, 0.33, 0.17, 0.155, -2.54, 1.77),
                    arc(0.46, 0.66, 0.19, 0.175, -1.77, 2.36)};
        case 4:
            return {{{0.60, 0.16}, {0.30, 0.58}},
                    {{0.30, 0.58}, {0.74, 0.58}},
                    {{0.60, 0.16}, {0.60, 0.84}}};
        case 5:
            return {{{0.66, 0.18}, {0.36, 0.18}},
                    {{0.36, 0.18}, {0.34, 0.46}},
                    arc(0.47, 0.63, 0.19, 0.185, -1.97, 2.36)};
        case 6:
            return {{{0.64, 0.16}, {0.52, 0.30}, {0.42, 0.48}, {0.365, 0.62}},
                    arc(0.50, 0.66, 0.155, 0.165, 0.0, kTau, 32)};
        case 7:
            return {{{0.30, 0.20}, {0.72, 0.20}}, {{0.72, 0.20}, {0.44, 0.84}}};
        case 8:
            return {arc(0.50, 0.32, 0.145, 0.15, 0.0, kTau, 32),
                    arc(0.50, 0.67, 0.175, 0.17, 0.0, kTau, 32)};
        case 9:
            return {arc(0.50, 0.34, 0.16, 0.16, 0.0, kTau, 32), {{0.66, 0.38}, {0.58, 0.84}}};
        default:
            throw ConfigError("synthetic digit class must be 0..9, got " + std::to_string(digit));
    }
}

inline double segment_distance(const Pt& p, const Pt& a, const Pt& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

inline Tensor render_digit(int digit, Rng& rng, const Options& opt = {}) {
    auto strokes = detail::digit_strokes(digit);
    const double j = opt.jitter;

    const double rot = rng.uniform(-0.29, 0.29) * j;
    const double sx = 1.0 + rng.uniform(-0.29, 0.22) * j;
    const double sy = 1.0 + rng.uniform(-0.29, 0.22) * j;
    const double shear = rng.uniform(-0.22, 0.22) * j;
    const double tx = rng.uniform(-0.09, 0.09) * j;
    const double ty = rng.uniform(-0.09, 0.09) * j;
    const double width = 0.045 + rng.uniform(-0.018, 0.018) * j;
    const double ink = 1.0 - 0.45 * rng.uniform01() * j;
    const double cr = std::cos(rot), sr = std::sin(rot);

    for (auto& poly : strokes) {
        for (auto& p : poly) {
            const double wx = rng.uniform(-0.032, 0.032) * j;
            const double wy = rng.uniform(-0.032, 0.032) * j;
            double x = (p.x - 0.5 + wx) * sx;
            double y = (p.y - 0.5 + wy) * sy;
            x += shear * y;
            const double rxp = cr * x - sr * y;
            const double ryp = sr * x + cr * y;
            p.x = rxp + 0.5 + tx;
            p.y = ryp + 0.5 + ty;
        }
    }

    Tensor img({1, opt.height, opt.width});
    for (std::int64_t y = 0; y < opt.height; ++y) {
        for (std::int64_t x = 0; x < opt.width; ++x) {
            const detail::Pt p{(static_cast<double>(x) + 0.5) / static_cast<double>(opt.width),
                               (static_cast<double>(y) + 0.5) / static_cast<double>(opt.height)};
            double d = 1e9;
            for (const auto& poly : strokes) {
                for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
                    d = std::min(d, detail::segment_distance(p, poly[i], poly[i + 1]));
                }
            }
            const double v = std::min(1.0, 1.4 * std::exp(-0.5 * (d / width) * (d / width)));
            img.at3(0, y, x) = ink * v;
        }
    }
    // Quantize to bytes so in-memory fixtures match their IDX round trip.
    for (double& v : img.data) {
        v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
    return img;
}

inline std::vector<LabeledImage> make_corpus(const std::vector<int>& classes, int per_class,
                                             std::uint64_t seed, const Options& opt = {}) {
    std::vector<LabeledImage> out;
    out.reserve(classes.size() * static_cast<std::size_t>(per_class));
    for (int cls : classes) {
        Rng rng(Rng::derive(seed, 0x73796eULL + static_cast<std::uint64_t>(cls)));
        for (int i = 0; i < per_class; ++i) {
            out.push_back({render_digit(cls, rng, opt), cls});
        }
    }
    return out;
}

}  // namespace fpqe::synth
