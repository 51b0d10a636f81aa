#include "longal/focal.hpp"

#include <cmath>

#include "longal/error.hpp"

namespace longal {

double focal_pixel_loss(double p, int y, double alpha, double gamma) {
    double pc = p;
    if (pc < kProbClampEps) pc = kProbClampEps;
    if (pc > 1.0 - kProbClampEps) pc = 1.0 - kProbClampEps;
    if (y) return -alpha * std::pow(1.0 - pc, gamma) * std::log(pc);
    return -alpha * std::pow(pc, gamma) * std::log(1.0 - pc);
}

double focal_pixel_dloss_dp(double p, int y, double alpha, double gamma) {
    if (p <= kProbClampEps || p >= 1.0 - kProbClampEps) return 0.0;
    if (y) {
        // d/dp [-a (1-p)^g ln p] = a g (1-p)^(g-1) ln p - a (1-p)^g / p
        double t = gamma > 0.0 ? gamma * std::pow(1.0 - p, gamma - 1.0) * std::log(p) : 0.0;
        return alpha * t - alpha * std::pow(1.0 - p, gamma) / p;
    }
    // d/dp [-a p^g ln(1-p)] = -a g p^(g-1) ln(1-p) + a p^g / (1-p)
    double t = gamma > 0.0 ? gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) : 0.0;
    return -alpha * t + alpha * std::pow(p, gamma) / (1.0 - p);
}

template <typename T>
double focal_loss_map(const T* p, const std::uint8_t* y, std::size_t n, double alpha, double gamma) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += focal_pixel_loss(static_cast<double>(p[i]), y[i] ? 1 : 0, alpha, gamma);
    }
    return acc / static_cast<double>(n);
}

template <typename T>
void focal_loss_backward_map(const T* p, const std::uint8_t* y, std::size_t n,
                             double alpha, double gamma, double scale, T* dldp) {
    for (std::size_t i = 0; i < n; ++i) {
        dldp[i] = static_cast<T>(
            scale * focal_pixel_dloss_dp(static_cast<double>(p[i]), y[i] ? 1 : 0, alpha, gamma));
    }
}

double focal_loss(const Image& p, const Mask& y, double alpha, double gamma) {
    if (p.h != y.h || p.w != y.w)
        fail(ErrorCode::ShapeMismatch, "probability map and mask shapes differ");
    return focal_loss_map(p.v.data(), y.v.data(), p.size(), alpha, gamma);
}

template double focal_loss_map<float>(const float*, const std::uint8_t*, std::size_t, double, double);
template double focal_loss_map<double>(const double*, const std::uint8_t*, std::size_t, double, double);
template void focal_loss_backward_map<float>(const float*, const std::uint8_t*, std::size_t, double,
                                             double, double, float*);
template void focal_loss_backward_map<double>(const double*, const std::uint8_t*, std::size_t, double,
                                              double, double, double*);

}  // namespace longal
