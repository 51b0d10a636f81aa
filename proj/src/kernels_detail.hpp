#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Row-level bodies shared by the serial and OMP image kernels. Keeping the
// per-row arithmetic in one place guarantees both variants round identically.

namespace longal::kernels::detail {

// Four-lane strided dot product with a fixed combine order. Both the serial
// and OMP parameter-gradient kernels accumulate through this helper, so they
// round identically while the independent lanes stay vectorizable.
template <typename T>
inline T dot_lanes4(const T* a, const T* b, int n) {
    T acc0 = T(0), acc1 = T(0), acc2 = T(0), acc3 = T(0);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) acc0 += a[i] * b[i];
    return (acc0 + acc1) + (acc2 + acc3);
}

template <typename T>
inline T sum_lanes4(const T* a, std::size_t n) {
    T acc0 = T(0), acc1 = T(0), acc2 = T(0), acc3 = T(0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i];
        acc1 += a[i + 1];
        acc2 += a[i + 2];
        acc3 += a[i + 3];
    }
    for (; i < n; ++i) acc0 += a[i];
    return (acc0 + acc1) + (acc2 + acc3);
}

inline void resize_bilinear_row(const float* in, int h, int w, float* out_row, int oh, int ow, int oy) {
    double sy = (oy + 0.5) * (static_cast<double>(h) / oh) - 0.5;
    if (sy < 0.0) sy = 0.0;
    if (sy > h - 1) sy = h - 1;
    int y0 = static_cast<int>(sy);
    if (y0 > h - 2) y0 = h - 2 >= 0 ? h - 2 : 0;
    double fy = sy - y0;
    int y1 = y0 + 1 < h ? y0 + 1 : y0;
    const double xscale = static_cast<double>(w) / ow;
    for (int ox = 0; ox < ow; ++ox) {
        double sx = (ox + 0.5) * xscale - 0.5;
        if (sx < 0.0) sx = 0.0;
        if (sx > w - 1) sx = w - 1;
        int x0 = static_cast<int>(sx);
        if (x0 > w - 2) x0 = w - 2 >= 0 ? w - 2 : 0;
        double fx = sx - x0;
        int x1 = x0 + 1 < w ? x0 + 1 : x0;
        double top = (1.0 - fx) * in[y0 * w + x0] + fx * in[y0 * w + x1];
        double bot = (1.0 - fx) * in[y1 * w + x0] + fx * in[y1 * w + x1];
        out_row[ox] = static_cast<float>((1.0 - fy) * top + fy * bot);
    }
}

inline void resize_nearest_row(const std::uint8_t* in, int h, int w, std::uint8_t* out_row,
                               int oh, int ow, int oy) {
    int sy = static_cast<int>((oy + 0.5) * (static_cast<double>(h) / oh));
    if (sy > h - 1) sy = h - 1;
    const double xscale = static_cast<double>(w) / ow;
    for (int ox = 0; ox < ow; ++ox) {
        int sx = static_cast<int>((ox + 0.5) * xscale);
        if (sx > w - 1) sx = w - 1;
        out_row[ox] = in[sy * w + sx];
    }
}

inline std::vector<double> gaussian_taps(double sigma, int radius) {
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        double v = std::exp(-(static_cast<double>(k) * k) / (2.0 * sigma * sigma));
        taps[k + radius] = v;
        sum += v;
    }
    for (double& v : taps) v /= sum;
    return taps;
}

inline int gaussian_radius(double sigma) {
    int r = static_cast<int>(std::ceil(3.0 * sigma));
    return r < 1 ? 1 : r;
}

inline void blur_h_row(const float* in, int /*h*/, int w, const std::vector<double>& taps,
                       int radius, float* out_row, int y) {
    const float* row = in + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            int xx = x + k;
            if (xx < 0) xx = 0;
            if (xx > w - 1) xx = w - 1;
            acc += taps[k + radius] * row[xx];
        }
        out_row[x] = static_cast<float>(acc);
    }
}

inline void blur_v_row(const float* tmp, int h, int w, const std::vector<double>& taps,
                       int radius, float* out_row, int y) {
    for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            int yy = y + k;
            if (yy < 0) yy = 0;
            if (yy > h - 1) yy = h - 1;
            acc += taps[k + radius] * tmp[static_cast<std::size_t>(yy) * w + x];
        }
        out_row[x] = static_cast<float>(acc);
    }
}

}  // namespace longal::kernels::detail
