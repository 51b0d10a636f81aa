#include "longal/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "kernels_detail.hpp"
#include "longal/rng.hpp"

// OpenMP kernels. Work is split across independent output elements (rows,
// weight entries, pixels); within one element the accumulation order is the
// same (ci, ky, kx) / scan order the serial reference uses, so results match
// the reference bit for bit at any thread count.

namespace longal::kernels {

template <typename T>
void conv3x3_forward_omp(const T* in, int cin, int h, int w,
                         const T* weight, const T* bias, int cout, T* out) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < cout * h; ++r) {
        const int co = r / h;
        const int oy = r % h;
        T* orow = out + (static_cast<std::size_t>(co) * h + oy) * w;
        for (int ox = 0; ox < w; ++ox) orow[ox] = bias[co];
        for (int ci = 0; ci < cin; ++ci) {
            const T* wbase = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int iy = oy + ky - 1;
                if (iy < 0 || iy >= h) continue;
                const T* irow = in + (static_cast<std::size_t>(ci) * h + iy) * w;
                for (int kx = 0; kx < 3; ++kx) {
                    const T wv = wbase[ky * 3 + kx];
                    const int xlo = kx == 0 ? 1 : 0;
                    const int xhi = kx == 2 ? w - 1 : w;
                    const int shift = kx - 1;
                    for (int ox = xlo; ox < xhi; ++ox) orow[ox] += wv * irow[ox + shift];
                }
            }
        }
    }
}

template <typename T>
void conv3x3_backward_input_omp(const T* gout, int cout, int h, int w,
                                const T* weight, int cin, T* gin) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < cin * h; ++r) {
        const int ci = r / h;
        const int iy = r % h;
        T* grow = gin + (static_cast<std::size_t>(ci) * h + iy) * w;
        for (int ix = 0; ix < w; ++ix) grow[ix] = T(0);
        for (int co = 0; co < cout; ++co) {
            const T* wbase = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int oy = iy + 1 - ky;
                if (oy < 0 || oy >= h) continue;
                const T* orow = gout + (static_cast<std::size_t>(co) * h + oy) * w;
                for (int kx = 0; kx < 3; ++kx) {
                    const T wv = wbase[ky * 3 + kx];
                    // ox = ix + 1 - kx must lie in [0, w)
                    const int xlo = kx == 2 ? 1 : 0;
                    const int xhi = kx == 0 ? w - 1 : w;
                    const int shift = 1 - kx;
                    for (int ix = xlo; ix < xhi; ++ix) grow[ix] += wv * orow[ix + shift];
                }
            }
        }
    }
}

template <typename T>
void conv3x3_backward_params_omp(const T* gout, int cout, int h, int w,
                                 const T* in, int cin, T* gweight, T* gbias) {
    const int n_entries = cout * cin * 9;
#pragma omp parallel for schedule(static)
    for (int e = 0; e < n_entries; ++e) {
        const int co = e / (cin * 9);
        const int rem = e % (cin * 9);
        const int ci = rem / 9;
        const int ky = (rem % 9) / 3;
        const int kx = rem % 3;
        const int xlo = kx == 0 ? 1 : 0;
        const int xhi = kx == 2 ? w - 1 : w;
        const int shift = kx - 1;
        T acc = T(0);
        for (int oy = 0; oy < h; ++oy) {
            const int iy = oy + ky - 1;
            if (iy < 0 || iy >= h) continue;
            const T* orow = gout + (static_cast<std::size_t>(co) * h + oy) * w + xlo;
            const T* irow = in + (static_cast<std::size_t>(ci) * h + iy) * w + xlo + shift;
            acc += detail::dot_lanes4(orow, irow, xhi - xlo);
        }
        gweight[e] = acc;
    }
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
        gbias[co] = detail::sum_lanes4(gout + static_cast<std::size_t>(co) * h * w,
                                       static_cast<std::size_t>(h) * w);
    }
}

template <typename T>
void conv1x1_forward_omp(const T* in, int cin, int h, int w,
                         const T* weight, const T* bias, int cout, T* out) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
        T* oplane = out + co * hw;
        for (std::size_t i = 0; i < hw; ++i) oplane[i] = bias[co];
        for (int ci = 0; ci < cin; ++ci) {
            const T wv = weight[static_cast<std::size_t>(co) * cin + ci];
            const T* iplane = in + ci * hw;
            for (std::size_t i = 0; i < hw; ++i) oplane[i] += wv * iplane[i];
        }
    }
}

template <typename T>
void conv1x1_backward_input_omp(const T* gout, int cout, int h, int w,
                                const T* weight, int cin, T* gin) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < cin; ++ci) {
        T* gplane = gin + ci * hw;
        for (std::size_t i = 0; i < hw; ++i) gplane[i] = T(0);
        for (int co = 0; co < cout; ++co) {
            const T wv = weight[static_cast<std::size_t>(co) * cin + ci];
            const T* oplane = gout + co * hw;
            for (std::size_t i = 0; i < hw; ++i) gplane[i] += wv * oplane[i];
        }
    }
}

template <typename T>
void conv1x1_backward_params_omp(const T* gout, int cout, int h, int w,
                                 const T* in, int cin, T* gweight, T* gbias) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int e = 0; e < cout * (cin + 1); ++e) {
        const int co = e / (cin + 1);
        const int ci = e % (cin + 1);
        if (ci < cin) {
            gweight[static_cast<std::size_t>(co) * cin + ci] =
                detail::dot_lanes4(gout + co * hw, in + ci * hw, static_cast<int>(hw));
        } else {
            gbias[co] = detail::sum_lanes4(gout + co * hw, hw);
        }
    }
}

template <typename T>
void relu_forward_omp(const T* in, std::size_t n, T* out) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward_omp(const T* gout, const T* act, std::size_t n, T* gin) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        gin[i] = act[i] > T(0) ? gout[i] : T(0);
}

template <typename T>
void sigmoid_forward_omp(const T* in, std::size_t n, T* out) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        out[i] = T(1) / (T(1) + std::exp(-in[i]));
}

template <typename T>
void dropout_forward_omp(const T* in, std::size_t n, double rate,
                         std::uint64_t seed, T* out, std::uint8_t* mask) {
    if (rate <= 0.0) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            out[i] = in[i];
            if (mask) mask[i] = 1;
        }
        return;
    }
    const T scale = T(1.0 / (1.0 - rate));
    const float frate = static_cast<float>(rate);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        bool keep = element_uniform(seed, static_cast<std::uint64_t>(i)) >= frate;
        out[i] = keep ? in[i] * scale : T(0);
        if (mask) mask[i] = keep ? 1 : 0;
    }
}

template <typename T>
void dropout_backward_omp(const T* gout, const std::uint8_t* mask, std::size_t n,
                          double rate, T* gin) {
    const T scale = rate > 0.0 ? T(1.0 / (1.0 - rate)) : T(1);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        gin[i] = mask[i] ? gout[i] * scale : T(0);
}

template <typename T>
void maxpool2_forward_omp(const T* in, int c, int h, int w, T* out, std::int32_t* argmax) {
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < c * oh; ++r) {
        const int ch = r / oh;
        const int oy = r % oh;
        const T* plane = in + static_cast<std::size_t>(ch) * h * w;
        T* orow = out + (static_cast<std::size_t>(ch) * oh + oy) * ow;
        std::int32_t* arow = argmax + (static_cast<std::size_t>(ch) * oh + oy) * ow;
        for (int ox = 0; ox < ow; ++ox) {
            const int base_y = 2 * oy, base_x = 2 * ox;
            std::int32_t best_idx = base_y * w + base_x;
            T best = plane[best_idx];
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const std::int32_t idx = (base_y + dy) * w + (base_x + dx);
                    if (plane[idx] > best) {
                        best = plane[idx];
                        best_idx = idx;
                    }
                }
            }
            orow[ox] = best;
            arow[ox] = best_idx;
        }
    }
}

template <typename T>
void maxpool2_backward_omp(const T* gout, int c, int h, int w, const std::int32_t* argmax, T* gin) {
    const int oh = h / 2, ow = w / 2;
    // pooled windows are disjoint, so scattering within one channel row pair
    // never races as long as channels are split across threads
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        T* iplane = gin + static_cast<std::size_t>(ch) * h * w;
        std::fill(iplane, iplane + static_cast<std::size_t>(h) * w, T(0));
        const T* gplane = gout + static_cast<std::size_t>(ch) * oh * ow;
        const std::int32_t* aplane = argmax + static_cast<std::size_t>(ch) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) iplane[aplane[i]] += gplane[i];
    }
}

template <typename T>
void upsample2_forward_omp(const T* in, int c, int h, int w, T* out) {
    const int oh = 2 * h, ow = 2 * w;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < c * oh; ++r) {
        const int ch = r / oh;
        const int oy = r % oh;
        const T* irow = in + (static_cast<std::size_t>(ch) * h + oy / 2) * w;
        T* orow = out + (static_cast<std::size_t>(ch) * oh + oy) * ow;
        for (int ox = 0; ox < ow; ++ox) orow[ox] = irow[ox / 2];
    }
}

template <typename T>
void upsample2_backward_omp(const T* gout, int c, int h, int w, T* gin) {
    const int oh = 2 * h, ow = 2 * w;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < c * h; ++r) {
        const int ch = r / h;
        const int iy = r % h;
        const T* gplane = gout + static_cast<std::size_t>(ch) * oh * ow;
        T* irow = gin + (static_cast<std::size_t>(ch) * h + iy) * w;
        for (int ix = 0; ix < w; ++ix) {
            T acc = gplane[(2 * iy) * ow + 2 * ix];
            acc += gplane[(2 * iy) * ow + 2 * ix + 1];
            acc += gplane[(2 * iy + 1) * ow + 2 * ix];
            acc += gplane[(2 * iy + 1) * ow + 2 * ix + 1];
            irow[ix] = acc;
        }
    }
}

void resize_bilinear_omp(const float* in, int h, int w, float* out, int oh, int ow) {
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < oh; ++oy) {
        detail::resize_bilinear_row(in, h, w, out + static_cast<std::size_t>(oy) * ow, oh, ow, oy);
    }
}

void resize_nearest_u8_omp(const std::uint8_t* in, int h, int w, std::uint8_t* out, int oh, int ow) {
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < oh; ++oy) {
        detail::resize_nearest_row(in, h, w, out + static_cast<std::size_t>(oy) * ow, oh, ow, oy);
    }
}

void gaussian_blur_omp(const float* in, int h, int w, double sigma, float* out) {
    const int radius = detail::gaussian_radius(sigma);
    const std::vector<double> taps = detail::gaussian_taps(sigma, radius);
    std::vector<float> tmp(static_cast<std::size_t>(h) * w);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        detail::blur_h_row(in, h, w, taps, radius, tmp.data() + static_cast<std::size_t>(y) * w, y);
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        detail::blur_v_row(tmp.data(), h, w, taps, radius, out + static_cast<std::size_t>(y) * w, y);
    }
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define LONGAL_INSTANTIATE_OMP(T)                                                                \
    template void conv3x3_forward_omp<T>(const T*, int, int, int, const T*, const T*, int, T*); \
    template void conv3x3_backward_input_omp<T>(const T*, int, int, int, const T*, int, T*);    \
    template void conv3x3_backward_params_omp<T>(const T*, int, int, int, const T*, int, T*, T*); \
    template void conv1x1_forward_omp<T>(const T*, int, int, int, const T*, const T*, int, T*); \
    template void conv1x1_backward_input_omp<T>(const T*, int, int, int, const T*, int, T*);    \
    template void conv1x1_backward_params_omp<T>(const T*, int, int, int, const T*, int, T*, T*); \
    template void relu_forward_omp<T>(const T*, std::size_t, T*);                               \
    template void relu_backward_omp<T>(const T*, const T*, std::size_t, T*);                    \
    template void sigmoid_forward_omp<T>(const T*, std::size_t, T*);                            \
    template void dropout_forward_omp<T>(const T*, std::size_t, double, std::uint64_t, T*, std::uint8_t*); \
    template void dropout_backward_omp<T>(const T*, const std::uint8_t*, std::size_t, double, T*); \
    template void maxpool2_forward_omp<T>(const T*, int, int, int, T*, std::int32_t*);          \
    template void maxpool2_backward_omp<T>(const T*, int, int, int, const std::int32_t*, T*);   \
    template void upsample2_forward_omp<T>(const T*, int, int, int, T*);                        \
    template void upsample2_backward_omp<T>(const T*, int, int, int, T*);

LONGAL_INSTANTIATE_OMP(float)
LONGAL_INSTANTIATE_OMP(double)

#undef LONGAL_INSTANTIATE_OMP

}  // namespace longal::kernels
