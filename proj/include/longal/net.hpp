#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "longal/error.hpp"
#include "longal/kernels.hpp"
#include "longal/rng.hpp"

namespace longal {

enum class DropoutMode { Off, Active };

// Encoder-decoder dense-prediction network: 3-channel input, two
// downsampling stages, a dropout-bearing bottleneck, two upsampling stages
// with skip connections, 1-channel sigmoid output. Channel widths scale
// with `base`; the embedding is the spatial mean of the bottleneck features.
//
// Templated on the scalar type: float is the runtime type (checkpoints store
// f32), double instantiations back the finite-difference gradient checks.
template <typename T>
struct NetBuf {
    int c = 0, h = 0, w = 0;
    std::vector<T> v;

    void resize(int c_, int h_, int w_) {
        c = c_;
        h = h_;
        w = w_;
        v.assign(static_cast<std::size_t>(c_) * h_ * w_, T(0));
    }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    std::size_t size() const { return v.size(); }
};

template <typename T>
struct NetWorkspace {
    int h = 0, w = 0;
    double applied_dropout_rate = 0.0;

    NetBuf<T> x, a1a, a1, p1, a2a, a2, p2, b1, bd, b2;
    NetBuf<T> u2, c2, d2a, d2, u1, c1, d1a, d1, z, p;
    std::vector<std::int32_t> arg1, arg2;
    std::vector<std::uint8_t> dmask;

    NetBuf<T> g_p, g_z, g_d1, g_d1a, g_c1, g_d2, g_d2a, g_c2;
    NetBuf<T> g_b2, g_bd, g_b1, g_p2, g_a2, g_a2a, g_p1, g_a1, g_a1a;

    std::vector<T> g_params;
};

template <typename T>
struct Net {
    int in_ch = 3;
    int base = 16;
    double dropout_rate = 0.5;

    struct Layer {
        int cin, cout, k;
        std::size_t w_off, b_off;
    };
    std::vector<Layer> layers;  // index map into the flat parameter vector
    std::vector<T> params;

    std::size_t param_count() const { return params.size(); }
    int embedding_dim() const { return 4 * base; }

    static Net create(int base, double dropout_rate, std::uint64_t init_seed, bool zero_head = true) {
        Net net;
        net.base = base;
        net.dropout_rate = dropout_rate;
        const int B = base;
        auto add = [&net](int cin, int cout, int k) {
            Layer l;
            l.cin = cin;
            l.cout = cout;
            l.k = k;
            l.w_off = net.params.size();
            net.params.resize(net.params.size() +
                              static_cast<std::size_t>(cout) * cin * k * k);
            l.b_off = net.params.size();
            net.params.resize(net.params.size() + cout);
            net.layers.push_back(l);
        };
        add(net.in_ch, B, 3);  // 0 enc1a
        add(B, B, 3);          // 1 enc1b
        add(B, 2 * B, 3);      // 2 enc2a
        add(2 * B, 2 * B, 3);  // 3 enc2b
        add(2 * B, 4 * B, 3);  // 4 bottleneck a
        add(4 * B, 4 * B, 3);  // 5 bottleneck b
        add(6 * B, 2 * B, 3);  // 6 dec2a (cat of upsampled 4B and skip 2B)
        add(2 * B, 2 * B, 3);  // 7 dec2b
        add(3 * B, B, 3);      // 8 dec1a (cat of upsampled 2B and skip B)
        add(B, B, 3);          // 9 dec1b
        add(B, 1, 1);          // 10 head

        Rng rng(seed_combine(init_seed, 0x696e6974ULL));
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            const Layer& l = net.layers[li];
            bool head = li + 1 == net.layers.size();
            std::size_t wn = static_cast<std::size_t>(l.cout) * l.cin * l.k * l.k;
            if (head && zero_head) {
                for (std::size_t i = 0; i < wn; ++i) net.params[l.w_off + i] = T(0);
            } else {
                double bound = std::sqrt(6.0 / (static_cast<double>(l.cin) * l.k * l.k));
                for (std::size_t i = 0; i < wn; ++i)
                    net.params[l.w_off + i] = static_cast<T>(rng.uniform(-bound, bound));
            }
            for (int i = 0; i < l.cout; ++i) net.params[l.b_off + i] = T(0);
        }
        return net;
    }

    const T* w(int li) const { return params.data() + layers[li].w_off; }
    const T* b(int li) const { return params.data() + layers[li].b_off; }

    void conv_fwd(int li, const NetBuf<T>& in, NetBuf<T>& out) const {
        const Layer& l = layers[li];
        out.resize(l.cout, in.h, in.w);
        if (l.k == 3)
            kernels::conv3x3_forward(in.data(), l.cin, in.h, in.w, w(li), b(li), l.cout, out.data());
        else
            kernels::conv1x1_forward(in.data(), l.cin, in.h, in.w, w(li), b(li), l.cout, out.data());
    }

    void forward(const T* input, int h, int w_, NetWorkspace<T>& ws, DropoutMode mode,
                 std::uint64_t dropout_seed) const {
        if (h % 4 != 0 || w_ % 4 != 0)
            fail(ErrorCode::ShapeMismatch, "input height and width must be divisible by 4");
        const int B = base;
        ws.h = h;
        ws.w = w_;
        const int h2 = h / 2, w2 = w_ / 2, h4 = h / 4, w4 = w_ / 4;

        ws.x.resize(in_ch, h, w_);
        std::copy(input, input + ws.x.size(), ws.x.data());

        conv_fwd(0, ws.x, ws.a1a);
        kernels::relu_forward(ws.a1a.data(), ws.a1a.size(), ws.a1a.data());
        conv_fwd(1, ws.a1a, ws.a1);
        kernels::relu_forward(ws.a1.data(), ws.a1.size(), ws.a1.data());

        ws.p1.resize(B, h2, w2);
        ws.arg1.resize(ws.p1.size());
        kernels::maxpool2_forward(ws.a1.data(), B, h, w_, ws.p1.data(), ws.arg1.data());

        conv_fwd(2, ws.p1, ws.a2a);
        kernels::relu_forward(ws.a2a.data(), ws.a2a.size(), ws.a2a.data());
        conv_fwd(3, ws.a2a, ws.a2);
        kernels::relu_forward(ws.a2.data(), ws.a2.size(), ws.a2.data());

        ws.p2.resize(2 * B, h4, w4);
        ws.arg2.resize(ws.p2.size());
        kernels::maxpool2_forward(ws.a2.data(), 2 * B, h2, w2, ws.p2.data(), ws.arg2.data());

        conv_fwd(4, ws.p2, ws.b1);
        kernels::relu_forward(ws.b1.data(), ws.b1.size(), ws.b1.data());

        ws.bd.resize(4 * B, h4, w4);
        ws.dmask.resize(ws.bd.size());
        ws.applied_dropout_rate = mode == DropoutMode::Active ? dropout_rate : 0.0;
        kernels::dropout_forward(ws.b1.data(), ws.b1.size(), ws.applied_dropout_rate, dropout_seed,
                                 ws.bd.data(), ws.dmask.data());

        conv_fwd(5, ws.bd, ws.b2);
        kernels::relu_forward(ws.b2.data(), ws.b2.size(), ws.b2.data());

        ws.u2.resize(4 * B, h2, w2);
        kernels::upsample2_forward(ws.b2.data(), 4 * B, h4, w4, ws.u2.data());
        ws.c2.resize(6 * B, h2, w2);
        std::copy(ws.u2.v.begin(), ws.u2.v.end(), ws.c2.v.begin());
        std::copy(ws.a2.v.begin(), ws.a2.v.end(), ws.c2.v.begin() + ws.u2.size());

        conv_fwd(6, ws.c2, ws.d2a);
        kernels::relu_forward(ws.d2a.data(), ws.d2a.size(), ws.d2a.data());
        conv_fwd(7, ws.d2a, ws.d2);
        kernels::relu_forward(ws.d2.data(), ws.d2.size(), ws.d2.data());

        ws.u1.resize(2 * B, h, w_);
        kernels::upsample2_forward(ws.d2.data(), 2 * B, h2, w2, ws.u1.data());
        ws.c1.resize(3 * B, h, w_);
        std::copy(ws.u1.v.begin(), ws.u1.v.end(), ws.c1.v.begin());
        std::copy(ws.a1.v.begin(), ws.a1.v.end(), ws.c1.v.begin() + ws.u1.size());

        conv_fwd(8, ws.c1, ws.d1a);
        kernels::relu_forward(ws.d1a.data(), ws.d1a.size(), ws.d1a.data());
        conv_fwd(9, ws.d1a, ws.d1);
        kernels::relu_forward(ws.d1.data(), ws.d1.size(), ws.d1.data());

        conv_fwd(10, ws.d1, ws.z);
        ws.p.resize(1, h, w_);
        kernels::sigmoid_forward(ws.z.data(), ws.z.size(), ws.p.data());
    }

    // Backward from dL/dp in ws.g_p; parameter gradients overwrite
    // ws.g_params (flat, same layout as params). Input gradients are not
    // produced.
    void backward(NetWorkspace<T>& ws) const {
        const int B = base;
        const int h = ws.h, w_ = ws.w;
        const int h2 = h / 2, w2 = w_ / 2, h4 = h / 4, w4 = w_ / 4;
        ws.g_params.assign(params.size(), T(0));
        T* gp = ws.g_params.data();

        auto conv_bwd = [&](int li, const NetBuf<T>& in, const NetBuf<T>& gout, NetBuf<T>* gin) {
            const Layer& l = layers[li];
            if (l.k == 3) {
                kernels::conv3x3_backward_params(gout.data(), l.cout, gout.h, gout.w, in.data(),
                                                 l.cin, gp + l.w_off, gp + l.b_off);
                if (gin) {
                    gin->resize(l.cin, gout.h, gout.w);
                    kernels::conv3x3_backward_input(gout.data(), l.cout, gout.h, gout.w, w(li),
                                                    l.cin, gin->data());
                }
            } else {
                kernels::conv1x1_backward_params(gout.data(), l.cout, gout.h, gout.w, in.data(),
                                                 l.cin, gp + l.w_off, gp + l.b_off);
                if (gin) {
                    gin->resize(l.cin, gout.h, gout.w);
                    kernels::conv1x1_backward_input(gout.data(), l.cout, gout.h, gout.w, w(li),
                                                    l.cin, gin->data());
                }
            }
        };

        // sigmoid: dz = dp * p * (1 - p)
        ws.g_z.resize(1, h, w_);
        for (std::size_t i = 0; i < ws.g_z.size(); ++i) {
            T pv = ws.p.v[i];
            ws.g_z.v[i] = ws.g_p.v[i] * pv * (T(1) - pv);
        }

        conv_bwd(10, ws.d1, ws.g_z, &ws.g_d1);

        kernels::relu_backward(ws.g_d1.data(), ws.d1.data(), ws.g_d1.size(), ws.g_d1.data());
        conv_bwd(9, ws.d1a, ws.g_d1, &ws.g_d1a);
        kernels::relu_backward(ws.g_d1a.data(), ws.d1a.data(), ws.g_d1a.size(), ws.g_d1a.data());
        conv_bwd(8, ws.c1, ws.g_d1a, &ws.g_c1);

        // split concat grad: first 2B channels flow to u1, last B to skip a1
        ws.g_d2.resize(2 * B, h2, w2);
        kernels::upsample2_backward(ws.g_c1.data(), 2 * B, h2, w2, ws.g_d2.data());

        kernels::relu_backward(ws.g_d2.data(), ws.d2.data(), ws.g_d2.size(), ws.g_d2.data());
        conv_bwd(7, ws.d2a, ws.g_d2, &ws.g_d2a);
        kernels::relu_backward(ws.g_d2a.data(), ws.d2a.data(), ws.g_d2a.size(), ws.g_d2a.data());
        conv_bwd(6, ws.c2, ws.g_d2a, &ws.g_c2);

        ws.g_b2.resize(4 * B, h4, w4);
        kernels::upsample2_backward(ws.g_c2.data(), 4 * B, h4, w4, ws.g_b2.data());

        kernels::relu_backward(ws.g_b2.data(), ws.b2.data(), ws.g_b2.size(), ws.g_b2.data());
        conv_bwd(5, ws.bd, ws.g_b2, &ws.g_bd);

        ws.g_b1.resize(4 * B, h4, w4);
        kernels::dropout_backward(ws.g_bd.data(), ws.dmask.data(), ws.g_bd.size(),
                                  ws.applied_dropout_rate, ws.g_b1.data());

        kernels::relu_backward(ws.g_b1.data(), ws.b1.data(), ws.g_b1.size(), ws.g_b1.data());
        conv_bwd(4, ws.p2, ws.g_b1, &ws.g_p2);

        ws.g_a2.resize(2 * B, h2, w2);
        kernels::maxpool2_backward(ws.g_p2.data(), 2 * B, h2, w2, ws.arg2.data(), ws.g_a2.data());
        // add the skip branch of the decoder concat
        {
            const T* skip = ws.g_c2.data() + static_cast<std::size_t>(4 * B) * h2 * w2;
            for (std::size_t i = 0; i < ws.g_a2.size(); ++i) ws.g_a2.v[i] += skip[i];
        }

        kernels::relu_backward(ws.g_a2.data(), ws.a2.data(), ws.g_a2.size(), ws.g_a2.data());
        conv_bwd(3, ws.a2a, ws.g_a2, &ws.g_a2a);
        kernels::relu_backward(ws.g_a2a.data(), ws.a2a.data(), ws.g_a2a.size(), ws.g_a2a.data());
        conv_bwd(2, ws.p1, ws.g_a2a, &ws.g_p1);

        ws.g_a1.resize(B, h, w_);
        kernels::maxpool2_backward(ws.g_p1.data(), B, h, w_, ws.arg1.data(), ws.g_a1.data());
        {
            const T* skip = ws.g_c1.data() + static_cast<std::size_t>(2 * B) * h * w_;
            for (std::size_t i = 0; i < ws.g_a1.size(); ++i) ws.g_a1.v[i] += skip[i];
        }

        kernels::relu_backward(ws.g_a1.data(), ws.a1.data(), ws.g_a1.size(), ws.g_a1.data());
        conv_bwd(1, ws.a1a, ws.g_a1, &ws.g_a1a);
        kernels::relu_backward(ws.g_a1a.data(), ws.a1a.data(), ws.g_a1a.size(), ws.g_a1a.data());
        conv_bwd(0, ws.x, ws.g_a1a, nullptr);
    }

    // channelwise spatial mean of the bottleneck features in ws.b2
    std::vector<T> embed_from(const NetWorkspace<T>& ws) const {
        const int D = 4 * base;
        const std::size_t hw = ws.b2.size() / D;
        std::vector<T> e(D);
        for (int ch = 0; ch < D; ++ch) {
            double acc = 0.0;
            const T* plane = ws.b2.data() + ch * hw;
            for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(plane[i]);
            e[ch] = static_cast<T>(acc / static_cast<double>(hw));
        }
        return e;
    }
};

}  // namespace longal
