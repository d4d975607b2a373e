#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "fpqe/autoencoder.hpp"
#include "fpqe/common.hpp"
#include "fpqe/image_ops.hpp"
#include "fpqe/manifest.hpp"
#include "fpqe/quantum.hpp"
#include "fpqe/rng.hpp"
#include "fpqe/tensor.hpp"

// The comparison encoders: angle, raw amplitude, PCA, patch-wise single-qubit
// (SQE) and adaptive-threshold pruning (ATP), each producing quantum-ready
// amplitude rows and a classical reconstruction for fidelity scoring. Encoders
// operate on the grayscale plane; color reconstructions replicate it.

namespace fpqe {

// ---------------------------------------------------------------------------
// Angle encoding: 3x3 area average, one qubit per pixel via RY(pi * value).
// ---------------------------------------------------------------------------

struct AngleEncoding {
    Tensor angles;  // [9]
    Tensor rows;    // [9,2] single-qubit product factors [cos(a/2), sin(a/2)]
};

inline AngleEncoding angle_encode(const Tensor& img) {
    const Tensor small = area_downsample(to_gray(img), 3, 3);
    AngleEncoding enc;
    enc.angles = Tensor({9});
    enc.rows = Tensor({9, 2});
    for (std::int64_t i = 0; i < 9; ++i) {
        const double a = kPi * small[i];
        enc.angles[i] = a;
        enc.rows.at2(i, 0) = std::cos(a / 2.0);
        enc.rows.at2(i, 1) = std::sin(a / 2.0);
    }
    return enc;
}

// Full 9-qubit product state, qubit i rotated by angles[i].
inline q::StateVector angle_product_state(const Tensor& angles) {
    q::StateVector s = q::StateVector::zero_state(static_cast<int>(angles.size()));
    for (std::int64_t i = 0; i < angles.size(); ++i) {
        q::apply_ry(s, static_cast<int>(i), angles[i]);
    }
    return s;
}

inline Tensor angle_reconstruct(const Tensor& img) {
    const Tensor small = area_downsample(to_gray(img), 3, 3);
    const Tensor up = nearest_upsample(small, img.shape[img.rank() - 2], img.shape[img.rank() - 1]);
    return img.rank() == 3 ? gray_to_channels(up, img.shape[0]) : up;
}

// ---------------------------------------------------------------------------
// Raw amplitude encoding: bilinear 16x16, flattened and L2-normalized.
// ---------------------------------------------------------------------------

inline Tensor amplitude_baseline_encode(const Tensor& img) {
    const Tensor resized = bilinear_resize(to_gray(img), 16, 16);
    Tensor row = resized.reshaped({1, 256});
    double nrm = 0.0;
    for (double v : row.data) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm < std::numeric_limits<double>::min()) {
        throw DegenerateInputError("amplitude encoding of an all-zero image");
    }
    for (double& v : row.data) v /= nrm;
    return row;
}

inline Tensor amplitude_reconstruct(const Tensor& img) {
    const Tensor resized = bilinear_resize(to_gray(img), 16, 16);
    const Tensor up = bilinear_resize(resized, img.shape[img.rank() - 2], img.shape[img.rank() - 1]);
    return img.rank() == 3 ? gray_to_channels(up, img.shape[0]) : up;
}

// ---------------------------------------------------------------------------
// PCA: top-k components of the centered pixel covariance via orthogonal
// iteration with a final Rayleigh-Ritz rotation.
// ---------------------------------------------------------------------------

struct PcaModel {
    Tensor components;          // [d,k], orthonormal columns
    Tensor mean;                // [d]
    Tensor explained_variance;  // [k], non-increasing
    std::int64_t img_c = 1, img_h = 0, img_w = 0;

    std::int64_t dim() const { return mean.size(); }
    std::int64_t num_components() const { return components.shape[1]; }
};

namespace detail {

// Modified Gram-Schmidt on the columns of a [d,k] matrix.
inline void orthonormalize_columns(Tensor& m) {
    const std::int64_t d = m.shape[0], k = m.shape[1];
    for (std::int64_t j = 0; j < k; ++j) {
        for (std::int64_t p = 0; p < j; ++p) {
            double dot = 0.0;
            for (std::int64_t i = 0; i < d; ++i) dot += m.at2(i, j) * m.at2(i, p);
            for (std::int64_t i = 0; i < d; ++i) m.at2(i, j) -= dot * m.at2(i, p);
        }
        double nrm = 0.0;
        for (std::int64_t i = 0; i < d; ++i) nrm += m.at2(i, j) * m.at2(i, j);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-300) throw DegenerateInputError("rank-deficient basis during PCA iteration");
        for (std::int64_t i = 0; i < d; ++i) m.at2(i, j) /= nrm;
    }
}

// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
inline void jacobi_eigen_sym(Tensor a, Tensor& eigvals, Tensor& eigvecs) {
    const std::int64_t n = a.shape[0];
    eigvecs = Tensor({n, n});
    for (std::int64_t i = 0; i < n; ++i) eigvecs.at2(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::int64_t p = 0; p < n; ++p)
            for (std::int64_t qq = p + 1; qq < n; ++qq) off += a.at2(p, qq) * a.at2(p, qq);
        if (off < 1e-28) break;
        for (std::int64_t p = 0; p < n; ++p) {
            for (std::int64_t qq = p + 1; qq < n; ++qq) {
                const double apq = a.at2(p, qq);
                if (std::abs(apq) < 1e-300) continue;
                const double tau = (a.at2(qq, qq) - a.at2(p, p)) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::int64_t i = 0; i < n; ++i) {
                    const double aip = a.at2(i, p), aiq = a.at2(i, qq);
                    a.at2(i, p) = c * aip - s * aiq;
                    a.at2(i, qq) = s * aip + c * aiq;
                }
                for (std::int64_t i = 0; i < n; ++i) {
                    const double api = a.at2(p, i), aqi = a.at2(qq, i);
                    a.at2(p, i) = c * api - s * aqi;
                    a.at2(qq, i) = s * api + c * aqi;
                }
                for (std::int64_t i = 0; i < n; ++i) {
                    const double vip = eigvecs.at2(i, p), viq = eigvecs.at2(i, qq);
                    eigvecs.at2(i, p) = c * vip - s * viq;
                    eigvecs.at2(i, qq) = s * vip + c * viq;
                }
            }
        }
    }
    eigvals = Tensor({n});
    for (std::int64_t i = 0; i < n; ++i) eigvals[i] = a.at2(i, i);
}

}  // namespace detail

inline PcaModel pca_fit(const std::vector<Tensor>& images, int k = 9, std::uint64_t seed = 0) {
    if (static_cast<int>(images.size()) < k) {
        throw ConfigError("pca_fit: need at least " + std::to_string(k) + " images, have " +
                          std::to_string(images.size()));
    }
    const Tensor first_gray = to_gray(images.front());
    const std::int64_t H = first_gray.shape[0], W = first_gray.shape[1];
    const std::int64_t d = H * W;
    const std::size_t n = images.size();

    PcaModel model;
    model.img_c = images.front().rank() == 3 ? images.front().shape[0] : 1;
    model.img_h = H;
    model.img_w = W;
    model.mean = Tensor({d});

    std::vector<Tensor> flats;
    flats.reserve(n);
    for (const auto& img : images) {
        Tensor g = to_gray(img);
        if (g.shape[0] != H || g.shape[1] != W) throw ShapeError("pca_fit: mixed image sizes");
        flats.push_back(g.reshaped({d}));
        for (std::int64_t i = 0; i < d; ++i) model.mean[i] += flats.back()[i];
    }
    for (std::int64_t i = 0; i < d; ++i) model.mean[i] /= static_cast<double>(n);

    // Dense covariance, symmetric half then mirrored.
    Tensor cov({d, d});
    std::vector<double> centered(static_cast<std::size_t>(d));
    for (const auto& f : flats) {
        for (std::int64_t i = 0; i < d; ++i) centered[static_cast<std::size_t>(i)] = f[i] - model.mean[i];
        for (std::int64_t i = 0; i < d; ++i) {
            const double ci = centered[static_cast<std::size_t>(i)];
            if (ci == 0.0) continue;
            double* row = &cov.data[static_cast<std::size_t>(i * d)];
            for (std::int64_t j = i; j < d; ++j) row[j] += ci * centered[static_cast<std::size_t>(j)];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t j = i; j < d; ++j) {
            const double v = cov.at2(i, j) * inv_n;
            cov.at2(i, j) = v;
            cov.at2(j, i) = v;
        }

    // Orthogonal iteration on the top-k subspace.
    Rng rng(Rng::derive(seed, 0x706361ULL));
    Tensor basis({d, k});
    for (double& v : basis.data) v = rng.normal();
    detail::orthonormalize_columns(basis);
    Tensor product({d, k});
    auto multiply = [&](const Tensor& in, Tensor& out) {
        for (std::int64_t i = 0; i < d; ++i) {
            const double* crow = &cov.data[static_cast<std::size_t>(i * d)];
            for (std::int64_t j = 0; j < k; ++j) {
                double acc = 0.0;
                for (std::int64_t t = 0; t < d; ++t) acc += crow[t] * in.at2(t, j);
                out.at2(i, j) = acc;
            }
        }
    };
    for (int iter = 0; iter < 1000; ++iter) {
        multiply(basis, product);
        Tensor next = product;
        detail::orthonormalize_columns(next);
        double drift = 0.0;
        for (std::int64_t j = 0; j < k; ++j) {
            double dot = 0.0;
            for (std::int64_t i = 0; i < d; ++i) dot += next.at2(i, j) * basis.at2(i, j);
            drift = std::max(drift, 1.0 - std::abs(dot));
        }
        basis = std::move(next);
        if (drift < 1e-15 && iter > 4) break;
    }

    // Rayleigh-Ritz rotation separates eigenpairs inside the converged subspace.
    multiply(basis, product);
    Tensor small({k, k});
    for (std::int64_t i = 0; i < k; ++i)
        for (std::int64_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < d; ++t) acc += basis.at2(t, i) * product.at2(t, j);
            small.at2(i, j) = acc;
        }
    Tensor ritz_vals, ritz_vecs;
    detail::jacobi_eigen_sym(small, ritz_vals, ritz_vecs);
    std::vector<std::int64_t> order(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&ritz_vals](std::int64_t x, std::int64_t y) { return ritz_vals[x] > ritz_vals[y]; });

    model.components = Tensor({d, k});
    model.explained_variance = Tensor({k});
    for (std::int64_t j = 0; j < k; ++j) {
        const std::int64_t src = order[static_cast<std::size_t>(j)];
        model.explained_variance[j] = ritz_vals[src];
        for (std::int64_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < k; ++t) acc += basis.at2(i, t) * ritz_vecs.at2(t, src);
            model.components.at2(i, j) = acc;
        }
        // Sign convention: largest-magnitude entry positive.
        std::int64_t arg = 0;
        for (std::int64_t i = 1; i < d; ++i) {
            if (std::abs(model.components.at2(i, j)) > std::abs(model.components.at2(arg, j))) arg = i;
        }
        if (model.components.at2(arg, j) < 0.0) {
            for (std::int64_t i = 0; i < d; ++i) model.components.at2(i, j) = -model.components.at2(i, j);
        }
    }
    return model;
}

inline Tensor pca_encode(const PcaModel& m, const Tensor& img) {
    const Tensor g = to_gray(img);
    if (g.shape[0] != m.img_h || g.shape[1] != m.img_w) {
        throw ShapeError("pca_encode: image " + Tensor::shape_str(img.shape) +
                         " does not match fitted size");
    }
    const std::int64_t d = m.dim(), k = m.num_components();
    Tensor code({k});
    for (std::int64_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < d; ++i) acc += m.components.at2(i, j) * (g[i] - m.mean[i]);
        code[j] = acc;
    }
    return code;
}

inline Tensor pca_reconstruct(const PcaModel& m, const Tensor& code) {
    const std::int64_t d = m.dim(), k = m.num_components();
    if (code.size() != k) throw ShapeError("pca_reconstruct: code length mismatch");
    Tensor flat({d});
    for (std::int64_t i = 0; i < d; ++i) {
        double acc = m.mean[i];
        for (std::int64_t j = 0; j < k; ++j) acc += m.components.at2(i, j) * code[j];
        flat[i] = acc;
    }
    const Tensor plane = flat.reshaped({m.img_h, m.img_w});
    return m.img_c > 1 ? gray_to_channels(plane, m.img_c) : plane.reshaped({1, m.img_h, m.img_w});
}

// How the 9-dim PCA code reaches a register: zero-padded to 16 amplitudes
// (default) or one qubit per component via angle rotation.
enum class PcaRegisterMode { PaddedAmplitude, AnglePerComponent };

inline Tensor pca_register_rows(const PcaModel& m, const Tensor& code, PcaRegisterMode mode) {
    const std::int64_t k = code.size();
    if (mode == PcaRegisterMode::PaddedAmplitude) {
        std::int64_t len = 2;
        while (len < k) len <<= 1;
        Tensor row({1, len});
        for (std::int64_t i = 0; i < k; ++i) row.at2(0, i) = code[i];
        double nrm = 0.0;
        for (double v : row.data) nrm += v * v;
        nrm = std::sqrt(nrm);
        if (nrm < std::numeric_limits<double>::min()) {
            throw DegenerateInputError("pca code is the zero vector (input equals the mean)");
        }
        for (double& v : row.data) v /= nrm;
        return row;
    }
    // Angle mode: squash each component to (-pi/2, pi/2) and emit qubit factors.
    Tensor rows({k, 2});
    for (std::int64_t i = 0; i < k; ++i) {
        const double scale = std::sqrt(std::max(m.explained_variance[i], 1e-12));
        const double a = std::atan(code[i] / scale);
        rows.at2(i, 0) = std::cos(a / 2.0);
        rows.at2(i, 1) = std::sin(a / 2.0);
    }
    return rows;
}

inline void save_pca(const std::string& dir, const PcaModel& m, KvMap extra = {}) {
    std::filesystem::create_directories(dir);
    KvMap kv = std::move(extra);
    kv["kind"] = "pca";
    kv["version"] = kVersion;
    kv["pca.image_shape"] = std::to_string(m.img_c) + "," + std::to_string(m.img_h) + "," +
                            std::to_string(m.img_w);
    write_fpqt(dir + "/components.fpqt", m.components);
    write_fpqt(dir + "/mean.fpqt", m.mean);
    write_fpqt(dir + "/explained_variance.fpqt", m.explained_variance);
    write_kv_file(dir + "/manifest.txt", kv);
}

inline PcaModel load_pca(const std::string& dir) {
    KvMap kv = read_kv_file(dir + "/manifest.txt");
    if (kv_get(kv, "kind") != "pca") throw ParseError(dir + ": manifest kind is not pca");
    PcaModel m;
    m.components = read_fpqt(dir + "/components.fpqt");
    m.mean = read_fpqt(dir + "/mean.fpqt");
    m.explained_variance = read_fpqt(dir + "/explained_variance.fpqt");
    std::istringstream is(kv_get(kv, "pca.image_shape"));
    char comma;
    is >> m.img_c >> comma >> m.img_h >> comma >> m.img_w;
    return m;
}

// ---------------------------------------------------------------------------
// SQE: 3x3 patch grid, each patch summarized by (mean, horizontal-gradient
// mean, vertical-gradient mean) and mapped to one qubit's Bloch angles
// theta = pi*mean, phi = pi*(gx+gy)/2. This is a documented reimplementation;
// the amplitude rows keep the real RY factor and drop the phase (a lone-qubit
// Z measurement cannot see it).
// ---------------------------------------------------------------------------

struct SqeEncoding {
    Tensor stats;  // [3,9]: mean, gx, gy per patch
    Tensor rows;   // [9,2]
};

inline SqeEncoding sqe_encode(const Tensor& img) {
    const Tensor g = to_gray(img);
    const std::int64_t H = g.shape[0], W = g.shape[1];
    if (H < 3 || W < 3) {
        throw ShapeError("sqe_encode needs at least a 3x3 image, got " +
                         Tensor::shape_str(img.shape));
    }
    SqeEncoding enc;
    enc.stats = Tensor({3, 9});
    enc.rows = Tensor({9, 2});
    for (std::int64_t pi = 0; pi < 3; ++pi) {
        const std::int64_t y0 = cell_bound(pi, 3, H), y1 = cell_bound(pi + 1, 3, H);
        for (std::int64_t pj = 0; pj < 3; ++pj) {
            const std::int64_t x0 = cell_bound(pj, 3, W), x1 = cell_bound(pj + 1, 3, W);
            const std::int64_t patch = pi * 3 + pj;
            double mean = 0.0, gx = 0.0, gy = 0.0;
            std::int64_t n = 0, nx = 0, ny = 0;
            for (std::int64_t y = y0; y < y1; ++y)
                for (std::int64_t x = x0; x < x1; ++x) {
                    mean += g.at2(y, x);
                    ++n;
                    if (x + 1 < x1) {
                        gx += g.at2(y, x + 1) - g.at2(y, x);
                        ++nx;
                    }
                    if (y + 1 < y1) {
                        gy += g.at2(y + 1, x) - g.at2(y, x);
                        ++ny;
                    }
                }
            mean /= static_cast<double>(n);
            gx = nx > 0 ? gx / static_cast<double>(nx) : 0.0;
            gy = ny > 0 ? gy / static_cast<double>(ny) : 0.0;
            enc.stats.at2(0, patch) = mean;
            enc.stats.at2(1, patch) = gx;
            enc.stats.at2(2, patch) = gy;
            const double theta = kPi * mean;
            enc.rows.at2(patch, 0) = std::cos(theta / 2.0);
            enc.rows.at2(patch, 1) = std::sin(theta / 2.0);
        }
    }
    return enc;
}

// Full Bloch state of one patch qubit, phase included.
inline q::StateVector sqe_patch_state(const SqeEncoding& enc, int patch) {
    const double theta = kPi * enc.stats.at2(0, patch);
    const double phi = kPi * 0.5 * (enc.stats.at2(1, patch) + enc.stats.at2(2, patch));
    q::StateVector s = q::StateVector::zero_state(1);
    s.amps[0] = q::cplx{std::cos(theta / 2.0), 0.0};
    s.amps[1] = std::exp(q::cplx{0.0, phi}) * std::sin(theta / 2.0);
    return s;
}

inline Tensor sqe_reconstruct(const Tensor& img) {
    const Tensor g = to_gray(img);
    const SqeEncoding enc = sqe_encode(img);
    const std::int64_t H = g.shape[0], W = g.shape[1];
    Tensor plane({H, W});
    for (std::int64_t pi = 0; pi < 3; ++pi) {
        const std::int64_t y0 = cell_bound(pi, 3, H), y1 = cell_bound(pi + 1, 3, H);
        for (std::int64_t pj = 0; pj < 3; ++pj) {
            const std::int64_t x0 = cell_bound(pj, 3, W), x1 = cell_bound(pj + 1, 3, W);
            const double fill = enc.stats.at2(0, pi * 3 + pj);
            for (std::int64_t y = y0; y < y1; ++y)
                for (std::int64_t x = x0; x < x1; ++x) plane.at2(y, x) = fill;
        }
    }
    return img.rank() == 3 ? gray_to_channels(plane, img.shape[0]) : plane;
}

// ---------------------------------------------------------------------------
// ATP: amplitude encoding with adaptive-threshold pruning. Coefficients below
// the (1 - keep_fraction) magnitude quantile are zeroed before normalization.
// ---------------------------------------------------------------------------

struct AtpEncoding {
    Tensor row;     // [1,256], pruned and renormalized
    Tensor pruned;  // [16,16], original scale with zeroed entries
};

inline AtpEncoding atp_encode(const Tensor& img, double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw ConfigError("atp keep fraction must be in (0,1], got " +
                          std::to_string(keep_fraction));
    }
    const Tensor resized = bilinear_resize(to_gray(img), 16, 16);
    const std::int64_t n = resized.size();
    std::vector<double> mags(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = std::abs(resized[i]);
    std::sort(mags.begin(), mags.end());
    const std::int64_t cut = static_cast<std::int64_t>(
        std::floor((1.0 - keep_fraction) * static_cast<double>(n)));
    const double threshold = mags[static_cast<std::size_t>(std::clamp<std::int64_t>(cut, 0, n - 1))];

    AtpEncoding enc;
    enc.pruned = resized;
    for (double& v : enc.pruned.data) {
        if (std::abs(v) < threshold) v = 0.0;
    }
    enc.row = enc.pruned.reshaped({1, 256});
    double nrm = 0.0;
    for (double v : enc.row.data) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm < std::numeric_limits<double>::min()) {
        throw DegenerateInputError("atp pruning removed every coefficient");
    }
    for (double& v : enc.row.data) v /= nrm;
    return enc;
}

inline Tensor atp_reconstruct(const Tensor& img, double keep_fraction) {
    const AtpEncoding enc = atp_encode(img, keep_fraction);
    const Tensor up = bilinear_resize(enc.pruned, img.shape[img.rank() - 2], img.shape[img.rank() - 1]);
    return img.rank() == 3 ? gray_to_channels(up, img.shape[0]) : up;
}

// ---------------------------------------------------------------------------
// Encoder specs and the unified runtime encoder
// ---------------------------------------------------------------------------

enum class EncoderKind { Angle, Amplitude, Pca, Sqe, Atp, Fpqe };

inline const char* encoder_kind_name(EncoderKind k) {
    switch (k) {
        case EncoderKind::Angle: return "angle";
        case EncoderKind::Amplitude: return "amplitude";
        case EncoderKind::Pca: return "pca";
        case EncoderKind::Sqe: return "sqe";
        case EncoderKind::Atp: return "atp";
        case EncoderKind::Fpqe: return "fpqe";
    }
    return "?";
}

inline EncoderKind encoder_kind_from_name(const std::string& name) {
    if (name == "angle") return EncoderKind::Angle;
    if (name == "amplitude") return EncoderKind::Amplitude;
    if (name == "pca") return EncoderKind::Pca;
    if (name == "sqe") return EncoderKind::Sqe;
    if (name == "atp") return EncoderKind::Atp;
    if (name == "fpqe") return EncoderKind::Fpqe;
    throw ConfigError("unknown encoder kind '" + name + "'");
}

struct EncoderSpec {
    EncoderKind kind = EncoderKind::Fpqe;
    int qubits = 6;                       // nominal register budget label
    std::vector<std::int64_t> latent_shape;
    bool pruning = false;
    double keep_fraction = 0.5;
    PcaRegisterMode pca_mode = PcaRegisterMode::PaddedAmplitude;

    // Standard configurations. ATP is labeled 8 qubits: its (16,16) latent is
    // 256 amplitudes, an 8-qubit register.
    static EncoderSpec preset(EncoderKind k) {
        switch (k) {
            case EncoderKind::Angle: return {k, 9, {3, 3}, false};
            case EncoderKind::Amplitude: return {k, 8, {16, 16}, false};
            case EncoderKind::Pca: return {k, 9, {9}, false};
            case EncoderKind::Sqe: return {k, 9, {3, 9}, false};
            case EncoderKind::Atp: return {k, 8, {16, 16}, true};
            case EncoderKind::Fpqe: return {k, 6, {64, 64}, false};
        }
        throw ConfigError("bad encoder kind");
    }

    void validate_preset() const {
        const EncoderSpec ref = preset(kind);
        if (qubits != ref.qubits || latent_shape != ref.latent_shape || pruning != ref.pruning) {
            throw ConfigError(std::string("encoder spec for '") + encoder_kind_name(kind) +
                              "' does not match its standard configuration");
        }
    }
};

// Value-semantic encoder usable after fitting; PCA needs pca_fit output and
// FPQE needs a trained autoencoder.
class Encoder {
public:
    EncoderSpec spec;

    static Encoder angle() { return Encoder(EncoderSpec::preset(EncoderKind::Angle)); }
    static Encoder amplitude() { return Encoder(EncoderSpec::preset(EncoderKind::Amplitude)); }
    static Encoder sqe() { return Encoder(EncoderSpec::preset(EncoderKind::Sqe)); }

    static Encoder atp(double keep_fraction) {
        Encoder e(EncoderSpec::preset(EncoderKind::Atp));
        e.spec.keep_fraction = keep_fraction;
        return e;
    }

    static Encoder pca(PcaModel model, PcaRegisterMode mode = PcaRegisterMode::PaddedAmplitude) {
        Encoder e(EncoderSpec::preset(EncoderKind::Pca));
        e.spec.pca_mode = mode;
        e.pca_ = std::make_shared<PcaModel>(std::move(model));
        return e;
    }

    static Encoder fpqe(FrozenEncoder frozen, std::shared_ptr<AutoencoderModel> full_model,
                        EncoderSpec spec) {
        Encoder e(spec);
        e.frozen_ = std::make_shared<FrozenEncoder>(std::move(frozen));
        e.autoencoder_ = std::move(full_model);
        return e;
    }

    // Quantum-ready amplitude rows [c, len].
    Tensor encode_rows(const Tensor& img) const {
        switch (spec.kind) {
            case EncoderKind::Angle: return angle_encode(img).rows;
            case EncoderKind::Amplitude: return amplitude_baseline_encode(img);
            case EncoderKind::Pca:
                return pca_register_rows(pca(), pca_encode(pca(), img), spec.pca_mode);
            case EncoderKind::Sqe: return sqe_encode(img).rows;
            case EncoderKind::Atp: return atp_encode(img, spec.keep_fraction).row;
            case EncoderKind::Fpqe: return frozen().fpqe_encode(img);
        }
        throw ConfigError("bad encoder kind");
    }

    Tensor reconstruct(const Tensor& img) const {
        switch (spec.kind) {
            case EncoderKind::Angle: return angle_reconstruct(img);
            case EncoderKind::Amplitude: return amplitude_reconstruct(img);
            case EncoderKind::Pca: return pca_reconstruct(pca(), pca_encode(pca(), img));
            case EncoderKind::Sqe: return sqe_reconstruct(img);
            case EncoderKind::Atp: return atp_reconstruct(img, spec.keep_fraction);
            case EncoderKind::Fpqe: {
                if (!autoencoder_) {
                    throw ConfigError("fpqe reconstruction needs the full autoencoder checkpoint");
                }
                return fpqe::reconstruct(*autoencoder_, img);
            }
        }
        throw ConfigError("bad encoder kind");
    }

    const PcaModel& pca() const {
        if (!pca_) throw ConfigError("pca encoder used before fitting a model");
        return *pca_;
    }

    const FrozenEncoder& frozen() const {
        if (!frozen_) throw ConfigError("fpqe encoder used before loading a trained checkpoint");
        return *frozen_;
    }

private:
    explicit Encoder(EncoderSpec s) : spec(s) {}

    std::shared_ptr<PcaModel> pca_;
    std::shared_ptr<FrozenEncoder> frozen_;
    mutable std::shared_ptr<AutoencoderModel> autoencoder_;
};

// ---------------------------------------------------------------------------
// Encoded dataset containers: psi [N,c,len] + labels [N] + manifest.
// ---------------------------------------------------------------------------

struct EncodedDataset {
    Tensor psi;               // [N, c, len]
    std::vector<int> labels;  // length N
    std::string encoder_name;
};

inline void save_encoded_dataset(const std::string& dir, const EncodedDataset& ds,
                                 KvMap extra = {}) {
    std::filesystem::create_directories(dir);
    write_fpqt(dir + "/psi.fpqt", ds.psi);
    Tensor lbl({static_cast<std::int64_t>(ds.labels.size())});
    for (std::size_t i = 0; i < ds.labels.size(); ++i) lbl[static_cast<std::int64_t>(i)] =
        static_cast<double>(ds.labels[i]);
    write_fpqt(dir + "/labels.fpqt", lbl);
    KvMap kv = std::move(extra);
    kv["kind"] = "encoded-dataset";
    kv["version"] = kVersion;
    kv["encoder"] = ds.encoder_name;
    kv["count"] = std::to_string(ds.labels.size());
    write_kv_file(dir + "/manifest.txt", kv);
}

inline EncodedDataset load_encoded_dataset(const std::string& dir) {
    KvMap kv = read_kv_file(dir + "/manifest.txt");
    if (kv_get(kv, "kind") != "encoded-dataset") {
        throw ParseError(dir + ": manifest kind is not encoded-dataset");
    }
    EncodedDataset ds;
    ds.psi = read_fpqt(dir + "/psi.fpqt");
    const Tensor lbl = read_fpqt(dir + "/labels.fpqt");
    ds.labels.reserve(static_cast<std::size_t>(lbl.size()));
    for (std::int64_t i = 0; i < lbl.size(); ++i) ds.labels.push_back(static_cast<int>(lbl[i]));
    ds.encoder_name = kv_get(kv, "encoder");
    if (ds.psi.rank() != 3 ||
        ds.psi.shape[0] != static_cast<std::int64_t>(ds.labels.size())) {
        throw ParseError(dir + ": psi/labels disagree on sample count");
    }
    return ds;
}

}  // namespace fpqe
