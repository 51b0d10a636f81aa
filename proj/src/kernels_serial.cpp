#include "longal/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "kernels_detail.hpp"
#include "longal/rng.hpp"

// Naive reference implementations. Written for clarity, not speed; the OMP
// kernels must reproduce these bit for bit (same per-element accumulation
// order), which the kernel tests assert on random inputs.

namespace longal::kernels {

template <typename T>
void conv3x3_forward_serial(const T* in, int cin, int h, int w,
                            const T* weight, const T* bias, int cout, T* out) {
    for (int co = 0; co < cout; ++co) {
        for (int oy = 0; oy < h; ++oy) {
            for (int ox = 0; ox < w; ++ox) {
                T acc = bias[co];
                for (int ci = 0; ci < cin; ++ci) {
                    for (int ky = 0; ky < 3; ++ky) {
                        int iy = oy + ky - 1;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int ix = ox + kx - 1;
                            if (ix < 0 || ix >= w) continue;
                            acc += in[(static_cast<std::size_t>(ci) * h + iy) * w + ix] *
                                   weight[((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx];
                        }
                    }
                }
                out[(static_cast<std::size_t>(co) * h + oy) * w + ox] = acc;
            }
        }
    }
}

template <typename T>
void conv3x3_backward_input_serial(const T* gout, int cout, int h, int w,
                                   const T* weight, int cin, T* gin) {
    for (int ci = 0; ci < cin; ++ci) {
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                T acc = T(0);
                for (int co = 0; co < cout; ++co) {
                    for (int ky = 0; ky < 3; ++ky) {
                        int oy = iy + 1 - ky;
                        if (oy < 0 || oy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int ox = ix + 1 - kx;
                            if (ox < 0 || ox >= w) continue;
                            acc += gout[(static_cast<std::size_t>(co) * h + oy) * w + ox] *
                                   weight[((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx];
                        }
                    }
                }
                gin[(static_cast<std::size_t>(ci) * h + iy) * w + ix] = acc;
            }
        }
    }
}

template <typename T>
void conv3x3_backward_params_serial(const T* gout, int cout, int h, int w,
                                    const T* in, int cin, T* gweight, T* gbias) {
    for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
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
                    gweight[((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx] = acc;
                }
            }
        }
    }
    for (int co = 0; co < cout; ++co) {
        gbias[co] = detail::sum_lanes4(gout + static_cast<std::size_t>(co) * h * w,
                                       static_cast<std::size_t>(h) * w);
    }
}

template <typename T>
void conv1x1_forward_serial(const T* in, int cin, int h, int w,
                            const T* weight, const T* bias, int cout, T* out) {
    std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int co = 0; co < cout; ++co) {
        for (std::size_t i = 0; i < hw; ++i) {
            T acc = bias[co];
            for (int ci = 0; ci < cin; ++ci) {
                acc += in[ci * hw + i] * weight[static_cast<std::size_t>(co) * cin + ci];
            }
            out[co * hw + i] = acc;
        }
    }
}

template <typename T>
void conv1x1_backward_input_serial(const T* gout, int cout, int h, int w,
                                   const T* weight, int cin, T* gin) {
    std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < cin; ++ci) {
        for (std::size_t i = 0; i < hw; ++i) {
            T acc = T(0);
            for (int co = 0; co < cout; ++co) {
                acc += gout[co * hw + i] * weight[static_cast<std::size_t>(co) * cin + ci];
            }
            gin[ci * hw + i] = acc;
        }
    }
}

template <typename T>
void conv1x1_backward_params_serial(const T* gout, int cout, int h, int w,
                                    const T* in, int cin, T* gweight, T* gbias) {
    std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
            gweight[static_cast<std::size_t>(co) * cin + ci] =
                detail::dot_lanes4(gout + co * hw, in + ci * hw, static_cast<int>(hw));
        }
        gbias[co] = detail::sum_lanes4(gout + co * hw, hw);
    }
}

template <typename T>
void relu_forward_serial(const T* in, std::size_t n, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward_serial(const T* gout, const T* act, std::size_t n, T* gin) {
    for (std::size_t i = 0; i < n; ++i) gin[i] = act[i] > T(0) ? gout[i] : T(0);
}

template <typename T>
void sigmoid_forward_serial(const T* in, std::size_t n, T* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = T(1) / (T(1) + std::exp(-in[i]));
    }
}

template <typename T>
void dropout_forward_serial(const T* in, std::size_t n, double rate,
                            std::uint64_t seed, T* out, std::uint8_t* mask) {
    if (rate <= 0.0) {
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i];
        if (mask) std::fill(mask, mask + n, std::uint8_t{1});
        return;
    }
    const T scale = T(1.0 / (1.0 - rate));
    const float frate = static_cast<float>(rate);
    for (std::size_t i = 0; i < n; ++i) {
        bool keep = element_uniform(seed, i) >= frate;
        out[i] = keep ? in[i] * scale : T(0);
        if (mask) mask[i] = keep ? 1 : 0;
    }
}

template <typename T>
void dropout_backward_serial(const T* gout, const std::uint8_t* mask, std::size_t n,
                             double rate, T* gin) {
    const T scale = rate > 0.0 ? T(1.0 / (1.0 - rate)) : T(1);
    for (std::size_t i = 0; i < n; ++i) gin[i] = mask[i] ? gout[i] * scale : T(0);
}

template <typename T>
void maxpool2_forward_serial(const T* in, int c, int h, int w, T* out, std::int32_t* argmax) {
    int oh = h / 2, ow = w / 2;
    for (int ch = 0; ch < c; ++ch) {
        const T* plane = in + static_cast<std::size_t>(ch) * h * w;
        T* oplane = out + static_cast<std::size_t>(ch) * oh * ow;
        std::int32_t* aplane = argmax + static_cast<std::size_t>(ch) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                // first max in scan order wins
                int base_y = 2 * oy, base_x = 2 * ox;
                std::int32_t best_idx = base_y * w + base_x;
                T best = plane[best_idx];
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        std::int32_t idx = (base_y + dy) * w + (base_x + dx);
                        if (plane[idx] > best) {
                            best = plane[idx];
                            best_idx = idx;
                        }
                    }
                }
                oplane[oy * ow + ox] = best;
                aplane[oy * ow + ox] = best_idx;
            }
        }
    }
}

template <typename T>
void maxpool2_backward_serial(const T* gout, int c, int h, int w, const std::int32_t* argmax, T* gin) {
    int oh = h / 2, ow = w / 2;
    std::fill(gin, gin + static_cast<std::size_t>(c) * h * w, T(0));
    for (int ch = 0; ch < c; ++ch) {
        const T* gplane = gout + static_cast<std::size_t>(ch) * oh * ow;
        const std::int32_t* aplane = argmax + static_cast<std::size_t>(ch) * oh * ow;
        T* iplane = gin + static_cast<std::size_t>(ch) * h * w;
        for (int i = 0; i < oh * ow; ++i) iplane[aplane[i]] += gplane[i];
    }
}

template <typename T>
void upsample2_forward_serial(const T* in, int c, int h, int w, T* out) {
    int oh = 2 * h, ow = 2 * w;
    for (int ch = 0; ch < c; ++ch) {
        const T* plane = in + static_cast<std::size_t>(ch) * h * w;
        T* oplane = out + static_cast<std::size_t>(ch) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                oplane[oy * ow + ox] = plane[(oy / 2) * w + (ox / 2)];
            }
        }
    }
}

template <typename T>
void upsample2_backward_serial(const T* gout, int c, int h, int w, T* gin) {
    int oh = 2 * h, ow = 2 * w;
    for (int ch = 0; ch < c; ++ch) {
        const T* gplane = gout + static_cast<std::size_t>(ch) * oh * ow;
        T* iplane = gin + static_cast<std::size_t>(ch) * h * w;
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                T acc = gplane[(2 * iy) * ow + 2 * ix];
                acc += gplane[(2 * iy) * ow + 2 * ix + 1];
                acc += gplane[(2 * iy + 1) * ow + 2 * ix];
                acc += gplane[(2 * iy + 1) * ow + 2 * ix + 1];
                iplane[iy * w + ix] = acc;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// image ops
// ---------------------------------------------------------------------------

void resize_bilinear_serial(const float* in, int h, int w, float* out, int oh, int ow) {
    for (int oy = 0; oy < oh; ++oy) {
        detail::resize_bilinear_row(in, h, w, out + static_cast<std::size_t>(oy) * ow, oh, ow, oy);
    }
}

void resize_nearest_u8_serial(const std::uint8_t* in, int h, int w, std::uint8_t* out, int oh, int ow) {
    for (int oy = 0; oy < oh; ++oy) {
        detail::resize_nearest_row(in, h, w, out + static_cast<std::size_t>(oy) * ow, oh, ow, oy);
    }
}

void gaussian_blur_serial(const float* in, int h, int w, double sigma, float* out) {
    int radius = detail::gaussian_radius(sigma);
    std::vector<double> taps = detail::gaussian_taps(sigma, radius);
    std::vector<float> tmp(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        detail::blur_h_row(in, h, w, taps, radius, tmp.data() + static_cast<std::size_t>(y) * w, y);
    }
    for (int y = 0; y < h; ++y) {
        detail::blur_v_row(tmp.data(), h, w, taps, radius, out + static_cast<std::size_t>(y) * w, y);
    }
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define LONGAL_INSTANTIATE_SERIAL(T)                                                                \
    template void conv3x3_forward_serial<T>(const T*, int, int, int, const T*, const T*, int, T*); \
    template void conv3x3_backward_input_serial<T>(const T*, int, int, int, const T*, int, T*);    \
    template void conv3x3_backward_params_serial<T>(const T*, int, int, int, const T*, int, T*, T*); \
    template void conv1x1_forward_serial<T>(const T*, int, int, int, const T*, const T*, int, T*); \
    template void conv1x1_backward_input_serial<T>(const T*, int, int, int, const T*, int, T*);    \
    template void conv1x1_backward_params_serial<T>(const T*, int, int, int, const T*, int, T*, T*); \
    template void relu_forward_serial<T>(const T*, std::size_t, T*);                               \
    template void relu_backward_serial<T>(const T*, const T*, std::size_t, T*);                    \
    template void sigmoid_forward_serial<T>(const T*, std::size_t, T*);                            \
    template void dropout_forward_serial<T>(const T*, std::size_t, double, std::uint64_t, T*, std::uint8_t*); \
    template void dropout_backward_serial<T>(const T*, const std::uint8_t*, std::size_t, double, T*); \
    template void maxpool2_forward_serial<T>(const T*, int, int, int, T*, std::int32_t*);          \
    template void maxpool2_backward_serial<T>(const T*, int, int, int, const std::int32_t*, T*);   \
    template void upsample2_forward_serial<T>(const T*, int, int, int, T*);                        \
    template void upsample2_backward_serial<T>(const T*, int, int, int, T*);

LONGAL_INSTANTIATE_SERIAL(float)
LONGAL_INSTANTIATE_SERIAL(double)

#undef LONGAL_INSTANTIATE_SERIAL

}  // namespace longal::kernels
