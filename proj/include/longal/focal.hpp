#pragma once

#include <cstddef>
#include <cstdint>

#include "longal/types.hpp"

namespace longal {

// Probabilities are clamped to [kProbClampEps, 1 - kProbClampEps] before the
// logarithms so the loss stays finite at p in {0, 1}.
inline constexpr double kProbClampEps = 1e-7;

// FL = -alpha * (1-p)^gamma * ln(p)      when y = 1
//      -alpha * p^gamma     * ln(1-p)    when y = 0
double focal_pixel_loss(double p, int y, double alpha, double gamma);

// dFL/dp at the (unclamped) p; zero where the clamp is active.
double focal_pixel_dloss_dp(double p, int y, double alpha, double gamma);

// Mean focal loss over a map. Accumulates in double regardless of T.
template <typename T>
double focal_loss_map(const T* p, const std::uint8_t* y, std::size_t n, double alpha, double gamma);

// Writes scale * dFL/dp_i into dldp (overwrite).
template <typename T>
void focal_loss_backward_map(const T* p, const std::uint8_t* y, std::size_t n,
                             double alpha, double gamma, double scale, T* dldp);

// Spec-facing form; throws ShapeMismatch on dimension disagreement.
double focal_loss(const Image& p, const Mask& y, double alpha, double gamma);

}  // namespace longal
