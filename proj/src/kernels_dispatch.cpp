#include "longal/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace longal::kernels {

namespace {
bool g_parallel =
#ifdef _OPENMP
    true;
#else
    false;
#endif
}  // namespace

void set_parallel_enabled(bool enabled) {
#ifdef _OPENMP
    g_parallel = enabled;
#else
    (void)enabled;
    g_parallel = false;
#endif
}

bool parallel_enabled() { return g_parallel; }

void set_max_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

#define LONGAL_DISPATCH(fn, ...)          \
    do {                                  \
        if (g_parallel)                   \
            fn##_omp(__VA_ARGS__);        \
        else                              \
            fn##_serial(__VA_ARGS__);     \
    } while (0)

template <typename T>
void conv3x3_forward(const T* in, int cin, int h, int w,
                     const T* weight, const T* bias, int cout, T* out) {
    LONGAL_DISPATCH(conv3x3_forward, in, cin, h, w, weight, bias, cout, out);
}

template <typename T>
void conv3x3_backward_input(const T* gout, int cout, int h, int w,
                            const T* weight, int cin, T* gin) {
    LONGAL_DISPATCH(conv3x3_backward_input, gout, cout, h, w, weight, cin, gin);
}

template <typename T>
void conv3x3_backward_params(const T* gout, int cout, int h, int w,
                             const T* in, int cin, T* gweight, T* gbias) {
    LONGAL_DISPATCH(conv3x3_backward_params, gout, cout, h, w, in, cin, gweight, gbias);
}

template <typename T>
void conv1x1_forward(const T* in, int cin, int h, int w,
                     const T* weight, const T* bias, int cout, T* out) {
    LONGAL_DISPATCH(conv1x1_forward, in, cin, h, w, weight, bias, cout, out);
}

template <typename T>
void conv1x1_backward_input(const T* gout, int cout, int h, int w,
                            const T* weight, int cin, T* gin) {
    LONGAL_DISPATCH(conv1x1_backward_input, gout, cout, h, w, weight, cin, gin);
}

template <typename T>
void conv1x1_backward_params(const T* gout, int cout, int h, int w,
                             const T* in, int cin, T* gweight, T* gbias) {
    LONGAL_DISPATCH(conv1x1_backward_params, gout, cout, h, w, in, cin, gweight, gbias);
}

template <typename T>
void relu_forward(const T* in, std::size_t n, T* out) {
    LONGAL_DISPATCH(relu_forward, in, n, out);
}

template <typename T>
void relu_backward(const T* gout, const T* act, std::size_t n, T* gin) {
    LONGAL_DISPATCH(relu_backward, gout, act, n, gin);
}

template <typename T>
void sigmoid_forward(const T* in, std::size_t n, T* out) {
    LONGAL_DISPATCH(sigmoid_forward, in, n, out);
}

template <typename T>
void dropout_forward(const T* in, std::size_t n, double rate,
                     std::uint64_t seed, T* out, std::uint8_t* mask) {
    LONGAL_DISPATCH(dropout_forward, in, n, rate, seed, out, mask);
}

template <typename T>
void dropout_backward(const T* gout, const std::uint8_t* mask, std::size_t n,
                      double rate, T* gin) {
    LONGAL_DISPATCH(dropout_backward, gout, mask, n, rate, gin);
}

template <typename T>
void maxpool2_forward(const T* in, int c, int h, int w, T* out, std::int32_t* argmax) {
    LONGAL_DISPATCH(maxpool2_forward, in, c, h, w, out, argmax);
}

template <typename T>
void maxpool2_backward(const T* gout, int c, int h, int w, const std::int32_t* argmax, T* gin) {
    LONGAL_DISPATCH(maxpool2_backward, gout, c, h, w, argmax, gin);
}

template <typename T>
void upsample2_forward(const T* in, int c, int h, int w, T* out) {
    LONGAL_DISPATCH(upsample2_forward, in, c, h, w, out);
}

template <typename T>
void upsample2_backward(const T* gout, int c, int h, int w, T* gin) {
    LONGAL_DISPATCH(upsample2_backward, gout, c, h, w, gin);
}

void resize_bilinear(const float* in, int h, int w, float* out, int oh, int ow) {
    LONGAL_DISPATCH(resize_bilinear, in, h, w, out, oh, ow);
}

void resize_nearest_u8(const std::uint8_t* in, int h, int w, std::uint8_t* out, int oh, int ow) {
    LONGAL_DISPATCH(resize_nearest_u8, in, h, w, out, oh, ow);
}

void gaussian_blur(const float* in, int h, int w, double sigma, float* out) {
    LONGAL_DISPATCH(gaussian_blur, in, h, w, sigma, out);
}

#undef LONGAL_DISPATCH

#define LONGAL_INSTANTIATE_DISPATCH(T)                                                      \
    template void conv3x3_forward<T>(const T*, int, int, int, const T*, const T*, int, T*); \
    template void conv3x3_backward_input<T>(const T*, int, int, int, const T*, int, T*);    \
    template void conv3x3_backward_params<T>(const T*, int, int, int, const T*, int, T*, T*); \
    template void conv1x1_forward<T>(const T*, int, int, int, const T*, const T*, int, T*); \
    template void conv1x1_backward_input<T>(const T*, int, int, int, const T*, int, T*);    \
    template void conv1x1_backward_params<T>(const T*, int, int, int, const T*, int, T*, T*); \
    template void relu_forward<T>(const T*, std::size_t, T*);                               \
    template void relu_backward<T>(const T*, const T*, std::size_t, T*);                    \
    template void sigmoid_forward<T>(const T*, std::size_t, T*);                            \
    template void dropout_forward<T>(const T*, std::size_t, double, std::uint64_t, T*, std::uint8_t*); \
    template void dropout_backward<T>(const T*, const std::uint8_t*, std::size_t, double, T*); \
    template void maxpool2_forward<T>(const T*, int, int, int, T*, std::int32_t*);          \
    template void maxpool2_backward<T>(const T*, int, int, int, const std::int32_t*, T*);   \
    template void upsample2_forward<T>(const T*, int, int, int, T*);                        \
    template void upsample2_backward<T>(const T*, int, int, int, T*);

LONGAL_INSTANTIATE_DISPATCH(float)
LONGAL_INSTANTIATE_DISPATCH(double)

#undef LONGAL_INSTANTIATE_DISPATCH

}  // namespace longal::kernels
