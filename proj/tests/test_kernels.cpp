#include <doctest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "longal/kernels.hpp"
#include "longal/rng.hpp"

using namespace longal;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    return v;
}

template <typename T>
bool bit_equal(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

TEST_CASE_TEMPLATE("conv3x3 forward: omp matches serial bit for bit", T, float, double) {
    Rng rng(1);
    for (auto [cin, cout, h, w] : {std::array<int, 4>{1, 1, 4, 4}, std::array<int, 4>{3, 8, 16, 12},
                                   std::array<int, 4>{5, 7, 9, 11}}) {
        auto in = random_vec<T>(static_cast<std::size_t>(cin) * h * w, rng);
        auto weight = random_vec<T>(static_cast<std::size_t>(cout) * cin * 9, rng);
        auto bias = random_vec<T>(cout, rng);
        std::vector<T> out_s(static_cast<std::size_t>(cout) * h * w), out_p(out_s.size());
        kernels::conv3x3_forward_serial(in.data(), cin, h, w, weight.data(), bias.data(), cout,
                                        out_s.data());
        kernels::conv3x3_forward_omp(in.data(), cin, h, w, weight.data(), bias.data(), cout,
                                     out_p.data());
        CHECK(bit_equal(out_s, out_p));
    }
}

TEST_CASE("conv3x3 forward: identity kernel reproduces the input") {
    Rng rng(2);
    const int h = 6, w = 5;
    auto in = random_vec<float>(h * w, rng);
    std::vector<float> weight(9, 0.0f);
    weight[4] = 1.0f;  // center tap
    std::vector<float> bias(1, 0.0f);
    std::vector<float> out(h * w);
    kernels::conv3x3_forward(in.data(), 1, h, w, weight.data(), bias.data(), 1, out.data());
    CHECK(bit_equal(in, out));
}

TEST_CASE("conv3x3 forward agrees with a direct per-element evaluation") {
    Rng rng(3);
    const int cin = 2, cout = 3, h = 5, w = 4;
    auto in = random_vec<float>(static_cast<std::size_t>(cin) * h * w, rng);
    auto weight = random_vec<float>(static_cast<std::size_t>(cout) * cin * 9, rng);
    auto bias = random_vec<float>(cout, rng);
    std::vector<float> out(static_cast<std::size_t>(cout) * h * w);
    kernels::conv3x3_forward(in.data(), cin, h, w, weight.data(), bias.data(), cout, out.data());
    for (int co = 0; co < cout; ++co) {
        for (int oy = 0; oy < h; ++oy) {
            for (int ox = 0; ox < w; ++ox) {
                float acc = bias[co];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            int iy = oy + ky - 1, ix = ox + kx - 1;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += in[(ci * h + iy) * w + ix] * weight[((co * cin + ci) * 3 + ky) * 3 + kx];
                        }
                CHECK(out[(co * h + oy) * w + ox] == acc);
            }
        }
    }
}

TEST_CASE_TEMPLATE("conv3x3 backward kernels: omp matches serial bit for bit", T, float, double) {
    Rng rng(4);
    const int cin = 4, cout = 6, h = 10, w = 8;
    auto in = random_vec<T>(static_cast<std::size_t>(cin) * h * w, rng);
    auto weight = random_vec<T>(static_cast<std::size_t>(cout) * cin * 9, rng);
    auto gout = random_vec<T>(static_cast<std::size_t>(cout) * h * w, rng);

    std::vector<T> gin_s(in.size()), gin_p(in.size());
    kernels::conv3x3_backward_input_serial(gout.data(), cout, h, w, weight.data(), cin, gin_s.data());
    kernels::conv3x3_backward_input_omp(gout.data(), cout, h, w, weight.data(), cin, gin_p.data());
    CHECK(bit_equal(gin_s, gin_p));

    std::vector<T> gw_s(weight.size()), gw_p(weight.size()), gb_s(cout), gb_p(cout);
    kernels::conv3x3_backward_params_serial(gout.data(), cout, h, w, in.data(), cin, gw_s.data(),
                                            gb_s.data());
    kernels::conv3x3_backward_params_omp(gout.data(), cout, h, w, in.data(), cin, gw_p.data(),
                                         gb_p.data());
    CHECK(bit_equal(gw_s, gw_p));
    CHECK(bit_equal(gb_s, gb_p));
}

TEST_CASE("conv3x3 backward_input is the adjoint of forward") {
    // <conv(x), y> == <x, conv_backward_input(y)> for zero bias, in double
    Rng rng(5);
    const int cin = 3, cout = 2, h = 7, w = 6;
    auto x = random_vec<double>(static_cast<std::size_t>(cin) * h * w, rng);
    auto y = random_vec<double>(static_cast<std::size_t>(cout) * h * w, rng);
    auto weight = random_vec<double>(static_cast<std::size_t>(cout) * cin * 9, rng);
    std::vector<double> bias(cout, 0.0);

    std::vector<double> fx(y.size());
    kernels::conv3x3_forward(x.data(), cin, h, w, weight.data(), bias.data(), cout, fx.data());
    std::vector<double> bty(x.size());
    kernels::conv3x3_backward_input(y.data(), cout, h, w, weight.data(), cin, bty.data());

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < fx.size(); ++i) lhs += fx[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * bty[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("conv3x3 backward_params matches finite differences") {
    Rng rng(6);
    const int cin = 2, cout = 2, h = 5, w = 5;
    auto in = random_vec<double>(static_cast<std::size_t>(cin) * h * w, rng);
    auto weight = random_vec<double>(static_cast<std::size_t>(cout) * cin * 9, rng);
    auto gout = random_vec<double>(static_cast<std::size_t>(cout) * h * w, rng);
    std::vector<double> bias(cout, 0.1);

    std::vector<double> gw(weight.size()), gb(cout);
    kernels::conv3x3_backward_params(gout.data(), cout, h, w, in.data(), cin, gw.data(), gb.data());

    // L = sum(out * gout); dL/dw via central differences
    auto loss = [&](const std::vector<double>& wv, const std::vector<double>& bv) {
        std::vector<double> out(static_cast<std::size_t>(cout) * h * w);
        kernels::conv3x3_forward(in.data(), cin, h, w, wv.data(), bv.data(), cout, out.data());
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * gout[i];
        return acc;
    };
    const double eps = 1e-6;
    Rng pick(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t i = static_cast<std::size_t>(pick.below(weight.size()));
        auto wp = weight, wm = weight;
        wp[i] += eps;
        wm[i] -= eps;
        double fd = (loss(wp, bias) - loss(wm, bias)) / (2 * eps);
        CHECK(gw[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE_TEMPLATE("conv1x1 kernels: omp matches serial bit for bit", T, float, double) {
    Rng rng(8);
    const int cin = 5, cout = 3, h = 9, w = 7;
    auto in = random_vec<T>(static_cast<std::size_t>(cin) * h * w, rng);
    auto weight = random_vec<T>(static_cast<std::size_t>(cout) * cin, rng);
    auto bias = random_vec<T>(cout, rng);
    auto gout = random_vec<T>(static_cast<std::size_t>(cout) * h * w, rng);

    std::vector<T> out_s(static_cast<std::size_t>(cout) * h * w), out_p(out_s.size());
    kernels::conv1x1_forward_serial(in.data(), cin, h, w, weight.data(), bias.data(), cout, out_s.data());
    kernels::conv1x1_forward_omp(in.data(), cin, h, w, weight.data(), bias.data(), cout, out_p.data());
    CHECK(bit_equal(out_s, out_p));

    std::vector<T> gin_s(in.size()), gin_p(in.size());
    kernels::conv1x1_backward_input_serial(gout.data(), cout, h, w, weight.data(), cin, gin_s.data());
    kernels::conv1x1_backward_input_omp(gout.data(), cout, h, w, weight.data(), cin, gin_p.data());
    CHECK(bit_equal(gin_s, gin_p));

    std::vector<T> gw_s(weight.size()), gw_p(weight.size()), gb_s(cout), gb_p(cout);
    kernels::conv1x1_backward_params_serial(gout.data(), cout, h, w, in.data(), cin, gw_s.data(), gb_s.data());
    kernels::conv1x1_backward_params_omp(gout.data(), cout, h, w, in.data(), cin, gw_p.data(), gb_p.data());
    CHECK(bit_equal(gw_s, gw_p));
    CHECK(bit_equal(gb_s, gb_p));
}

TEST_CASE("maxpool2: omp matches serial, ties go to the first in scan order") {
    Rng rng(9);
    const int c = 3, h = 8, w = 6;
    auto in = random_vec<float>(static_cast<std::size_t>(c) * h * w, rng);
    std::vector<float> out_s(static_cast<std::size_t>(c) * (h / 2) * (w / 2)), out_p(out_s.size());
    std::vector<std::int32_t> arg_s(out_s.size()), arg_p(out_s.size());
    kernels::maxpool2_forward_serial(in.data(), c, h, w, out_s.data(), arg_s.data());
    kernels::maxpool2_forward_omp(in.data(), c, h, w, out_p.data(), arg_p.data());
    CHECK(bit_equal(out_s, out_p));
    CHECK(std::memcmp(arg_s.data(), arg_p.data(), arg_s.size() * 4) == 0);

    // tie rule
    std::vector<float> flat(4 * 4, 0.5f);
    std::vector<float> pooled(4);
    std::vector<std::int32_t> arg(4);
    kernels::maxpool2_forward(flat.data(), 1, 4, 4, pooled.data(), arg.data());
    CHECK(arg[0] == 0);
    CHECK(arg[1] == 2);
    CHECK(arg[2] == 8);
    CHECK(arg[3] == 10);

    // backward scatters into the argmax slots
    auto gout = random_vec<float>(out_s.size(), rng);
    std::vector<float> gin_s(in.size()), gin_p(in.size());
    kernels::maxpool2_backward_serial(gout.data(), c, h, w, arg_s.data(), gin_s.data());
    kernels::maxpool2_backward_omp(gout.data(), c, h, w, arg_s.data(), gin_p.data());
    CHECK(bit_equal(gin_s, gin_p));
}

TEST_CASE("upsample2 forward/backward: omp matches serial; backward sums 4 children") {
    Rng rng(10);
    const int c = 2, h = 5, w = 4;
    auto in = random_vec<float>(static_cast<std::size_t>(c) * h * w, rng);
    std::vector<float> out_s(static_cast<std::size_t>(c) * 4 * h * w), out_p(out_s.size());
    kernels::upsample2_forward_serial(in.data(), c, h, w, out_s.data());
    kernels::upsample2_forward_omp(in.data(), c, h, w, out_p.data());
    CHECK(bit_equal(out_s, out_p));

    auto gout = random_vec<float>(out_s.size(), rng);
    std::vector<float> gin_s(in.size()), gin_p(in.size());
    kernels::upsample2_backward_serial(gout.data(), c, h, w, gin_s.data());
    kernels::upsample2_backward_omp(gout.data(), c, h, w, gin_p.data());
    CHECK(bit_equal(gin_s, gin_p));

    // spot check one element
    const int ow = 2 * w;
    float expect = gout[0] + gout[1] + gout[ow] + gout[ow + 1];
    CHECK(gin_s[0] == expect);
}

TEST_CASE("dropout: deterministic per seed, rate 0 is identity, omp matches serial") {
    Rng rng(11);
    auto in = random_vec<float>(1000, rng);
    std::vector<float> out1(in.size()), out2(in.size()), out_p(in.size());
    std::vector<std::uint8_t> m1(in.size()), m2(in.size()), mp(in.size());

    kernels::dropout_forward_serial(in.data(), in.size(), 0.5, 77, out1.data(), m1.data());
    kernels::dropout_forward_serial(in.data(), in.size(), 0.5, 77, out2.data(), m2.data());
    CHECK(bit_equal(out1, out2));
    kernels::dropout_forward_omp(in.data(), in.size(), 0.5, 77, out_p.data(), mp.data());
    CHECK(bit_equal(out1, out_p));

    kernels::dropout_forward(in.data(), in.size(), 0.0, 77, out1.data(), m1.data());
    CHECK(bit_equal(in, out1));

    // kept elements are scaled by 1/(1-rate)
    kernels::dropout_forward(in.data(), in.size(), 0.25, 5, out1.data(), m1.data());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (m1[i])
            CHECK(out1[i] == in[i] * (1.0f / 0.75f));
        else
            CHECK(out1[i] == 0.0f);
    }

    std::vector<float> gout(in.size(), 1.0f), gin(in.size());
    kernels::dropout_backward(gout.data(), m1.data(), in.size(), 0.25, gin.data());
    for (std::size_t i = 0; i < in.size(); ++i)
        CHECK(gin[i] == (m1[i] ? 1.0f / 0.75f : 0.0f));
}

TEST_CASE("relu and sigmoid: omp matches serial") {
    Rng rng(12);
    auto in = random_vec<float>(513, rng, -3.0, 3.0);
    std::vector<float> a(in.size()), b(in.size());
    kernels::relu_forward_serial(in.data(), in.size(), a.data());
    kernels::relu_forward_omp(in.data(), in.size(), b.data());
    CHECK(bit_equal(a, b));
    kernels::sigmoid_forward_serial(in.data(), in.size(), a.data());
    kernels::sigmoid_forward_omp(in.data(), in.size(), b.data());
    CHECK(bit_equal(a, b));
    for (float v : a) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("resize_bilinear: identity at equal size, omp matches serial") {
    Rng rng(13);
    const int h = 12, w = 9;
    auto in = random_vec<float>(static_cast<std::size_t>(h) * w, rng, 0.0, 1.0);
    std::vector<float> same(in.size());
    kernels::resize_bilinear(in.data(), h, w, same.data(), h, w);
    CHECK(bit_equal(in, same));

    std::vector<float> down_s(6 * 5), down_p(6 * 5);
    kernels::resize_bilinear_serial(in.data(), h, w, down_s.data(), 6, 5);
    kernels::resize_bilinear_omp(in.data(), h, w, down_p.data(), 6, 5);
    CHECK(bit_equal(down_s, down_p));
    for (float v : down_s) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("resize_nearest_u8: identity at equal size and binary-preserving") {
    Rng rng(14);
    const int h = 10, w = 8;
    std::vector<std::uint8_t> in(static_cast<std::size_t>(h) * w);
    for (auto& v : in) v = rng.uniform() < 0.4 ? 1 : 0;
    std::vector<std::uint8_t> same(in.size());
    kernels::resize_nearest_u8(in.data(), h, w, same.data(), h, w);
    CHECK(std::memcmp(in.data(), same.data(), in.size()) == 0);

    std::vector<std::uint8_t> up_s(20 * 16), up_p(20 * 16);
    kernels::resize_nearest_u8_serial(in.data(), h, w, up_s.data(), 20, 16);
    kernels::resize_nearest_u8_omp(in.data(), h, w, up_p.data(), 20, 16);
    CHECK(std::memcmp(up_s.data(), up_p.data(), up_s.size()) == 0);
    for (auto v : up_s) CHECK((v == 0 || v == 1));
}

TEST_CASE("gaussian_blur: preserves constants, omp matches serial") {
    const int h = 16, w = 16;
    std::vector<float> flat(static_cast<std::size_t>(h) * w, 0.6f);
    std::vector<float> out(flat.size());
    kernels::gaussian_blur(flat.data(), h, w, 1.0, out.data());
    for (float v : out) CHECK(v == doctest::Approx(0.6f).epsilon(1e-6));

    Rng rng(15);
    auto img = random_vec<float>(flat.size(), rng, 0.0, 1.0);
    std::vector<float> s(img.size()), p(img.size());
    kernels::gaussian_blur_serial(img.data(), h, w, 1.3, s.data());
    kernels::gaussian_blur_omp(img.data(), h, w, 1.3, p.data());
    CHECK(bit_equal(s, p));
}

TEST_CASE("dispatch honors the parallel switch") {
    bool was = kernels::parallel_enabled();
    Rng rng(16);
    auto in = random_vec<float>(64, rng);
    std::vector<float> a(64), b(64);
    kernels::set_parallel_enabled(false);
    kernels::relu_forward(in.data(), in.size(), a.data());
    kernels::set_parallel_enabled(true);
    kernels::relu_forward(in.data(), in.size(), b.data());
    kernels::set_parallel_enabled(was);
    CHECK(bit_equal(a, b));
}
