#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "fpqe/common.hpp"
#include "fpqe/tensor.hpp"

// Deterministic resampling kernels shared by the baseline encoders:
// area-average for downsampling, bilinear (half-pixel centers) for general
// resizing, nearest-neighbor for blocky upsampling.

namespace fpqe {

// Channel mean; [C,H,W] -> [H,W]. Grayscale images pass through.
inline Tensor to_gray(const Tensor& img) {
    if (img.rank() == 2) return img;
    if (img.rank() != 3) {
        throw ShapeError("to_gray expects [C,H,W] or [H,W], got " + Tensor::shape_str(img.shape));
    }
    const std::int64_t C = img.shape[0], H = img.shape[1], W = img.shape[2];
    Tensor out({H, W});
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x) {
            double acc = 0.0;
            for (std::int64_t c = 0; c < C; ++c) acc += img.at3(c, y, x);
            out.at2(y, x) = acc / static_cast<double>(C);
        }
    return out;
}

// [H,W] replicated across C channels.
inline Tensor gray_to_channels(const Tensor& gray, std::int64_t channels) {
    Tensor out({channels, gray.shape[0], gray.shape[1]});
    for (std::int64_t c = 0; c < channels; ++c) {
        std::copy(gray.data.begin(), gray.data.end(),
                  out.data.begin() + c * gray.size());
    }
    return out;
}

// Partition boundary i*extent/cells, covering every pixel exactly once.
inline std::int64_t cell_bound(std::int64_t i, std::int64_t cells, std::int64_t extent) {
    return i * extent / cells;
}

inline Tensor area_downsample(const Tensor& gray, std::int64_t h, std::int64_t w) {
    if (gray.rank() != 2) throw ShapeError("area_downsample expects [H,W]");
    const std::int64_t H = gray.shape[0], W = gray.shape[1];
    if (h > H || w > W) throw ShapeError("area_downsample cannot enlarge");
    Tensor out({h, w});
    for (std::int64_t i = 0; i < h; ++i) {
        const std::int64_t y0 = cell_bound(i, h, H), y1 = cell_bound(i + 1, h, H);
        for (std::int64_t j = 0; j < w; ++j) {
            const std::int64_t x0 = cell_bound(j, w, W), x1 = cell_bound(j + 1, w, W);
            double acc = 0.0;
            for (std::int64_t y = y0; y < y1; ++y)
                for (std::int64_t x = x0; x < x1; ++x) acc += gray.at2(y, x);
            out.at2(i, j) = acc / static_cast<double>((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

inline Tensor nearest_upsample(const Tensor& small, std::int64_t H, std::int64_t W) {
    if (small.rank() != 2) throw ShapeError("nearest_upsample expects [H,W]");
    const std::int64_t h = small.shape[0], w = small.shape[1];
    Tensor out({H, W});
    for (std::int64_t y = 0; y < H; ++y) {
        const std::int64_t sy = std::min<std::int64_t>(h - 1, y * h / H);
        for (std::int64_t x = 0; x < W; ++x) {
            const std::int64_t sx = std::min<std::int64_t>(w - 1, x * w / W);
            out.at2(y, x) = small.at2(sy, sx);
        }
    }
    return out;
}

// Half-pixel-center bilinear; same-size resize is the identity.
inline Tensor bilinear_resize(const Tensor& gray, std::int64_t h, std::int64_t w) {
    if (gray.rank() != 2) throw ShapeError("bilinear_resize expects [H,W]");
    const std::int64_t H = gray.shape[0], W = gray.shape[1];
    if (h == H && w == W) return gray;
    Tensor out({h, w});
    const double sy = static_cast<double>(H) / static_cast<double>(h);
    const double sx = static_cast<double>(W) / static_cast<double>(w);
    for (std::int64_t y = 0; y < h; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
        const std::int64_t y0 = static_cast<std::int64_t>(std::floor(fy));
        const std::int64_t y1 = std::min(y0 + 1, H - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::int64_t x = 0; x < w; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
            const std::int64_t x0 = static_cast<std::int64_t>(std::floor(fx));
            const std::int64_t x1 = std::min(x0 + 1, W - 1);
            const double wx = fx - static_cast<double>(x0);
            out.at2(y, x) = (1.0 - wy) * ((1.0 - wx) * gray.at2(y0, x0) + wx * gray.at2(y0, x1)) +
                            wy * ((1.0 - wx) * gray.at2(y1, x0) + wx * gray.at2(y1, x1));
        }
    }
    return out;
}

inline Tensor clamp01(Tensor t) {
    for (double& v : t.data) v = std::clamp(v, 0.0, 1.0);
    return t;
}

}  // namespace fpqe
