#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "fpqe/common.hpp"
#include "fpqe/tensor.hpp"

// Reconstruction fidelity scoring: MSE, PSNR (MAX = 1) and single-scale SSIM
// with the canonical 11x11 Gaussian window (sigma 1.5, C1 = 0.01^2,
// C2 = 0.03^2). Batch aggregation averages per-image metrics; infinite PSNR
// values (identical images) are excluded from the mean and counted.

namespace fpqe {

inline double mse_metric(const Tensor& x, const Tensor& y) {
    check_same_shape(x, y, "mse_metric");
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

inline double psnr_metric(const Tensor& x, const Tensor& y) {
    const double mse = mse_metric(x, y);
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size));
    const double mid = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        w[static_cast<std::size_t>(i)] = std::exp(-((i - mid) * (i - mid)) / (2.0 * sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Valid-mode separable Gaussian filter over one [H,W] plane.
inline std::vector<double> gauss_filter_valid(const double* img, std::int64_t H, std::int64_t W,
                                              const std::vector<double>& win) {
    const std::int64_t k = static_cast<std::int64_t>(win.size());
    const std::int64_t Hv = H - k + 1, Wv = W - k + 1;
    std::vector<double> rows(static_cast<std::size_t>(H * Wv));
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < Wv; ++x) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < k; ++t) acc += win[static_cast<std::size_t>(t)] * img[y * W + x + t];
            rows[static_cast<std::size_t>(y * Wv + x)] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(Hv * Wv));
    for (std::int64_t y = 0; y < Hv; ++y) {
        for (std::int64_t x = 0; x < Wv; ++x) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < k; ++t) acc += win[static_cast<std::size_t>(t)] * rows[static_cast<std::size_t>((y + t) * Wv + x)];
            out[static_cast<std::size_t>(y * Wv + x)] = acc;
        }
    }
    return out;
}

inline double ssim_plane(const double* a, const double* b, std::int64_t H, std::int64_t W) {
    int k = static_cast<int>(std::min<std::int64_t>(11, std::min(H, W)));
    if (k % 2 == 0) --k;  // reduced odd window for small images
    if (k < 1) throw ShapeError("ssim needs at least a 1x1 image");
    const auto win = gaussian_window(k, 1.5);
    const std::int64_t n = H * W;
    std::vector<double> aa(static_cast<std::size_t>(n)), bb(static_cast<std::size_t>(n)),
        ab(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        aa[static_cast<std::size_t>(i)] = a[i] * a[i];
        bb[static_cast<std::size_t>(i)] = b[i] * b[i];
        ab[static_cast<std::size_t>(i)] = a[i] * b[i];
    }
    const auto mu_a = gauss_filter_valid(a, H, W, win);
    const auto mu_b = gauss_filter_valid(b, H, W, win);
    const auto m_aa = gauss_filter_valid(aa.data(), H, W, win);
    const auto m_bb = gauss_filter_valid(bb.data(), H, W, win);
    const auto m_ab = gauss_filter_valid(ab.data(), H, W, win);
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = m_aa[i] - ma * ma;
        const double vb = m_bb[i] - mb * mb;
        const double cov = m_ab[i] - ma * mb;
        acc += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) /
               ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    return acc / static_cast<double>(mu_a.size());
}

}  // namespace detail

// Mean local SSIM over all valid window positions; color images average the
// per-channel scores.
inline double ssim_metric(const Tensor& x, const Tensor& y) {
    check_same_shape(x, y, "ssim_metric");
    if (x.rank() == 2) {
        return detail::ssim_plane(x.data.data(), y.data.data(), x.shape[0], x.shape[1]);
    }
    if (x.rank() == 3) {
        const std::int64_t C = x.shape[0], H = x.shape[1], W = x.shape[2];
        double acc = 0.0;
        for (std::int64_t c = 0; c < C; ++c) {
            acc += detail::ssim_plane(x.data.data() + c * H * W, y.data.data() + c * H * W, H, W);
        }
        return acc / static_cast<double>(C);
    }
    throw ShapeError("ssim_metric expects [H,W] or [C,H,W], got " + Tensor::shape_str(x.shape));
}

struct FidelityReport {
    double mse = 0.0;
    double psnr_db = 0.0;  // mean over images with finite PSNR
    double ssim = 0.0;
    int n_images = 0;
    int excluded_inf_count = 0;
    const char* aggregation = "per-image-mean";
};

inline FidelityReport batch_report(const std::vector<Tensor>& images,
                                   const std::function<Tensor(const Tensor&)>& reconstructor) {
    if (images.empty()) throw ConfigError("batch_report: empty dataset");
    FidelityReport r;
    r.n_images = static_cast<int>(images.size());
    double psnr_acc = 0.0;
    int psnr_n = 0;
    for (const auto& img : images) {
        const Tensor recon = reconstructor(img);
        r.mse += mse_metric(img, recon);
        r.ssim += ssim_metric(img, recon);
        const double p = psnr_metric(img, recon);
        if (std::isfinite(p)) {
            psnr_acc += p;
            ++psnr_n;
        } else {
            ++r.excluded_inf_count;
        }
    }
    r.mse /= static_cast<double>(images.size());
    r.ssim /= static_cast<double>(images.size());
    r.psnr_db = psnr_n > 0 ? psnr_acc / psnr_n : std::numeric_limits<double>::infinity();
    return r;
}

}  // namespace fpqe
