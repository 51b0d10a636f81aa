#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace longal::kernels {

// Dense inner loops used by the learner and the data pipeline. Every kernel
// exists twice: a plain serial reference and an OpenMP variant. The OMP
// variant parallelizes only across independent output elements and keeps
// each element's accumulation order identical to the reference, so the two
// produce bit-identical results. Tests assert exact equality; the
// bench_kernels tool compares wall time.

// Process-wide switch. When false (or when OpenMP is unavailable) the
// dispatching entry points run the serial reference.
void set_parallel_enabled(bool enabled);
bool parallel_enabled();

// Caps the OpenMP team size; 0 restores the library default.
void set_max_threads(int n);

// ---------------------------------------------------------------------------
// conv 3x3, stride 1, zero padding 1 ("same")
// in:   cin  x h x w      w: cout x cin x 3 x 3      b: cout
// out:  cout x h x w
// ---------------------------------------------------------------------------
template <typename T>
void conv3x3_forward_serial(const T* in, int cin, int h, int w,
                            const T* weight, const T* bias, int cout, T* out);
template <typename T>
void conv3x3_forward_omp(const T* in, int cin, int h, int w,
                         const T* weight, const T* bias, int cout, T* out);
template <typename T>
void conv3x3_forward(const T* in, int cin, int h, int w,
                     const T* weight, const T* bias, int cout, T* out);

// grad wrt input: gin[ci][iy][ix] = sum_co,ky,kx gout[co][iy+1-ky][ix+1-kx] * w[co][ci][ky][kx]
template <typename T>
void conv3x3_backward_input_serial(const T* gout, int cout, int h, int w,
                                   const T* weight, int cin, T* gin);
template <typename T>
void conv3x3_backward_input_omp(const T* gout, int cout, int h, int w,
                                const T* weight, int cin, T* gin);
template <typename T>
void conv3x3_backward_input(const T* gout, int cout, int h, int w,
                            const T* weight, int cin, T* gin);

// grad wrt weights/bias (overwrites gw/gb). Each weight element gathers its
// contributions over the spatial domain in a fixed order.
template <typename T>
void conv3x3_backward_params_serial(const T* gout, int cout, int h, int w,
                                    const T* in, int cin, T* gweight, T* gbias);
template <typename T>
void conv3x3_backward_params_omp(const T* gout, int cout, int h, int w,
                                 const T* in, int cin, T* gweight, T* gbias);
template <typename T>
void conv3x3_backward_params(const T* gout, int cout, int h, int w,
                             const T* in, int cin, T* gweight, T* gbias);

// ---------------------------------------------------------------------------
// conv 1x1
// ---------------------------------------------------------------------------
template <typename T>
void conv1x1_forward_serial(const T* in, int cin, int h, int w,
                            const T* weight, const T* bias, int cout, T* out);
template <typename T>
void conv1x1_forward_omp(const T* in, int cin, int h, int w,
                         const T* weight, const T* bias, int cout, T* out);
template <typename T>
void conv1x1_forward(const T* in, int cin, int h, int w,
                     const T* weight, const T* bias, int cout, T* out);

template <typename T>
void conv1x1_backward_input_serial(const T* gout, int cout, int h, int w,
                                   const T* weight, int cin, T* gin);
template <typename T>
void conv1x1_backward_input_omp(const T* gout, int cout, int h, int w,
                                const T* weight, int cin, T* gin);
template <typename T>
void conv1x1_backward_input(const T* gout, int cout, int h, int w,
                            const T* weight, int cin, T* gin);

template <typename T>
void conv1x1_backward_params_serial(const T* gout, int cout, int h, int w,
                                    const T* in, int cin, T* gweight, T* gbias);
template <typename T>
void conv1x1_backward_params_omp(const T* gout, int cout, int h, int w,
                                 const T* in, int cin, T* gweight, T* gbias);
template <typename T>
void conv1x1_backward_params(const T* gout, int cout, int h, int w,
                             const T* in, int cin, T* gweight, T* gbias);

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------
template <typename T>
void relu_forward_serial(const T* in, std::size_t n, T* out);
template <typename T>
void relu_forward_omp(const T* in, std::size_t n, T* out);
template <typename T>
void relu_forward(const T* in, std::size_t n, T* out);

// gin = gout where act > 0 else 0 (act is the post-ReLU value)
template <typename T>
void relu_backward_serial(const T* gout, const T* act, std::size_t n, T* gin);
template <typename T>
void relu_backward_omp(const T* gout, const T* act, std::size_t n, T* gin);
template <typename T>
void relu_backward(const T* gout, const T* act, std::size_t n, T* gin);

template <typename T>
void sigmoid_forward_serial(const T* in, std::size_t n, T* out);
template <typename T>
void sigmoid_forward_omp(const T* in, std::size_t n, T* out);
template <typename T>
void sigmoid_forward(const T* in, std::size_t n, T* out);

// Inverted dropout with a counter-based per-element RNG: element i is kept
// iff u(seed, i) >= rate, kept values scaled by 1/(1-rate). mask may be null.
template <typename T>
void dropout_forward_serial(const T* in, std::size_t n, double rate,
                            std::uint64_t seed, T* out, std::uint8_t* mask);
template <typename T>
void dropout_forward_omp(const T* in, std::size_t n, double rate,
                         std::uint64_t seed, T* out, std::uint8_t* mask);
template <typename T>
void dropout_forward(const T* in, std::size_t n, double rate,
                     std::uint64_t seed, T* out, std::uint8_t* mask);

template <typename T>
void dropout_backward_serial(const T* gout, const std::uint8_t* mask, std::size_t n,
                             double rate, T* gin);
template <typename T>
void dropout_backward_omp(const T* gout, const std::uint8_t* mask, std::size_t n,
                          double rate, T* gin);
template <typename T>
void dropout_backward(const T* gout, const std::uint8_t* mask, std::size_t n,
                      double rate, T* gin);

// ---------------------------------------------------------------------------
// 2x2 max pool / nearest 2x upsample (h, w even for pooling)
// ---------------------------------------------------------------------------
template <typename T>
void maxpool2_forward_serial(const T* in, int c, int h, int w, T* out, std::int32_t* argmax);
template <typename T>
void maxpool2_forward_omp(const T* in, int c, int h, int w, T* out, std::int32_t* argmax);
template <typename T>
void maxpool2_forward(const T* in, int c, int h, int w, T* out, std::int32_t* argmax);

template <typename T>
void maxpool2_backward_serial(const T* gout, int c, int h, int w, const std::int32_t* argmax, T* gin);
template <typename T>
void maxpool2_backward_omp(const T* gout, int c, int h, int w, const std::int32_t* argmax, T* gin);
template <typename T>
void maxpool2_backward(const T* gout, int c, int h, int w, const std::int32_t* argmax, T* gin);

template <typename T>
void upsample2_forward_serial(const T* in, int c, int h, int w, T* out);
template <typename T>
void upsample2_forward_omp(const T* in, int c, int h, int w, T* out);
template <typename T>
void upsample2_forward(const T* in, int c, int h, int w, T* out);

template <typename T>
void upsample2_backward_serial(const T* gout, int c, int h, int w, T* gin);
template <typename T>
void upsample2_backward_omp(const T* gout, int c, int h, int w, T* gin);
template <typename T>
void upsample2_backward(const T* gout, int c, int h, int w, T* gin);

// ---------------------------------------------------------------------------
// image ops (float only)
// ---------------------------------------------------------------------------

// bilinear, half-pixel centers; identity when sizes match
void resize_bilinear_serial(const float* in, int h, int w, float* out, int oh, int ow);
void resize_bilinear_omp(const float* in, int h, int w, float* out, int oh, int ow);
void resize_bilinear(const float* in, int h, int w, float* out, int oh, int ow);

// nearest neighbour, used for masks
void resize_nearest_u8_serial(const std::uint8_t* in, int h, int w, std::uint8_t* out, int oh, int ow);
void resize_nearest_u8_omp(const std::uint8_t* in, int h, int w, std::uint8_t* out, int oh, int ow);
void resize_nearest_u8(const std::uint8_t* in, int h, int w, std::uint8_t* out, int oh, int ow);

// separable Gaussian blur, clamped borders, kernel radius ceil(3*sigma)
void gaussian_blur_serial(const float* in, int h, int w, double sigma, float* out);
void gaussian_blur_omp(const float* in, int h, int w, double sigma, float* out);
void gaussian_blur(const float* in, int h, int w, double sigma, float* out);

}  // namespace longal::kernels
