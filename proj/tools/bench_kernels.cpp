#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "longal/kernels.hpp"
#include "longal/rng.hpp"

// Times each kernel's serial reference against its OpenMP variant on
// learner-sized shapes and reports the speedup. The two must agree bit for
// bit (asserted here on every run as a cheap cross-check; the real tests
// live in tests/).

using namespace longal;

namespace {

struct BenchCase {
    std::string name;
    std::function<void()> serial;
    std::function<void()> parallel;
    std::function<bool()> equal;
};

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warmup
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (ms < best) best = ms;
    }
    return best;
}

std::vector<float> random_vec(std::size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = rng.uniform_float() * 2.0f - 1.0f;
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1 && std::strcmp(argv[1], "--quick") == 0) reps = 2;

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (no OpenMP)\n");
#endif

    Rng rng(42);
    const int h = 64, w = 64;
    const int cin = 16, cout = 32;

    auto in = random_vec(static_cast<std::size_t>(cin) * h * w, rng);
    auto weight = random_vec(static_cast<std::size_t>(cout) * cin * 9, rng);
    auto bias = random_vec(cout, rng);
    auto gout = random_vec(static_cast<std::size_t>(cout) * h * w, rng);

    std::vector<float> out_s(static_cast<std::size_t>(cout) * h * w), out_p(out_s.size());
    std::vector<float> gin_s(in.size()), gin_p(in.size());
    std::vector<float> gw_s(weight.size()), gw_p(weight.size());
    std::vector<float> gb_s(bias.size()), gb_p(bias.size());

    std::vector<float> pool_out_s(static_cast<std::size_t>(cin) * (h / 2) * (w / 2));
    std::vector<float> pool_out_p(pool_out_s.size());
    std::vector<std::int32_t> arg_s(pool_out_s.size()), arg_p(pool_out_s.size());

    std::vector<float> up_out_s(static_cast<std::size_t>(cin) * 2 * h * 2 * w);
    std::vector<float> up_out_p(up_out_s.size());

    const int ih = 256, iw = 256, oh = 64, ow = 64;
    auto img = random_vec(static_cast<std::size_t>(ih) * iw, rng);
    std::vector<float> resized_s(static_cast<std::size_t>(oh) * ow), resized_p(resized_s.size());
    std::vector<float> blur_s(img.size()), blur_p(img.size());

    std::vector<float> drop_s(in.size()), drop_p(in.size());
    std::vector<std::uint8_t> mask_s(in.size()), mask_p(in.size());

    auto feq = [](const std::vector<float>& a, const std::vector<float>& b) {
        return std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
    };

    std::vector<BenchCase> cases;
    cases.push_back({"conv3x3_forward",
                     [&] { kernels::conv3x3_forward_serial(in.data(), cin, h, w, weight.data(),
                                                           bias.data(), cout, out_s.data()); },
                     [&] { kernels::conv3x3_forward_omp(in.data(), cin, h, w, weight.data(),
                                                        bias.data(), cout, out_p.data()); },
                     [&] { return feq(out_s, out_p); }});
    cases.push_back({"conv3x3_backward_input",
                     [&] { kernels::conv3x3_backward_input_serial(gout.data(), cout, h, w,
                                                                  weight.data(), cin, gin_s.data()); },
                     [&] { kernels::conv3x3_backward_input_omp(gout.data(), cout, h, w,
                                                               weight.data(), cin, gin_p.data()); },
                     [&] { return feq(gin_s, gin_p); }});
    cases.push_back({"conv3x3_backward_params",
                     [&] { kernels::conv3x3_backward_params_serial(gout.data(), cout, h, w, in.data(),
                                                                   cin, gw_s.data(), gb_s.data()); },
                     [&] { kernels::conv3x3_backward_params_omp(gout.data(), cout, h, w, in.data(),
                                                                cin, gw_p.data(), gb_p.data()); },
                     [&] { return feq(gw_s, gw_p) && feq(gb_s, gb_p); }});
    cases.push_back({"maxpool2_forward",
                     [&] { kernels::maxpool2_forward_serial(in.data(), cin, h, w, pool_out_s.data(),
                                                            arg_s.data()); },
                     [&] { kernels::maxpool2_forward_omp(in.data(), cin, h, w, pool_out_p.data(),
                                                         arg_p.data()); },
                     [&] { return feq(pool_out_s, pool_out_p); }});
    cases.push_back({"upsample2_forward",
                     [&] { kernels::upsample2_forward_serial(in.data(), cin, h, w, up_out_s.data()); },
                     [&] { kernels::upsample2_forward_omp(in.data(), cin, h, w, up_out_p.data()); },
                     [&] { return feq(up_out_s, up_out_p); }});
    cases.push_back({"dropout_forward",
                     [&] { kernels::dropout_forward_serial(in.data(), in.size(), 0.5, 7, drop_s.data(),
                                                           mask_s.data()); },
                     [&] { kernels::dropout_forward_omp(in.data(), in.size(), 0.5, 7, drop_p.data(),
                                                        mask_p.data()); },
                     [&] { return feq(drop_s, drop_p); }});
    cases.push_back({"resize_bilinear",
                     [&] { kernels::resize_bilinear_serial(img.data(), ih, iw, resized_s.data(), oh, ow); },
                     [&] { kernels::resize_bilinear_omp(img.data(), ih, iw, resized_p.data(), oh, ow); },
                     [&] { return feq(resized_s, resized_p); }});
    cases.push_back({"gaussian_blur",
                     [&] { kernels::gaussian_blur_serial(img.data(), ih, iw, 1.5, blur_s.data()); },
                     [&] { kernels::gaussian_blur_omp(img.data(), ih, iw, 1.5, blur_p.data()); },
                     [&] { return feq(blur_s, blur_p); }});

    std::printf("%-26s %12s %12s %9s %6s\n", "kernel", "serial(ms)", "omp(ms)", "speedup", "equal");
    int failures = 0;
    for (auto& c : cases) {
        double ts = time_ms(c.serial, reps);
        double tp = time_ms(c.parallel, reps);
        bool eq = c.equal();
        if (!eq) ++failures;
        std::printf("%-26s %12.3f %12.3f %8.2fx %6s\n", c.name.c_str(), ts, tp, ts / tp,
                    eq ? "yes" : "NO");
    }
    if (failures) {
        std::printf("MISMATCH: %d kernel(s) disagree with the serial reference\n", failures);
        return 1;
    }
    return 0;
}
