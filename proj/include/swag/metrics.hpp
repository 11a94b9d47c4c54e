#pragma once

#include "swag/image.hpp"

#include <array>

namespace swag {

constexpr double kPsnrCap = 100.0;
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;
constexpr double kDefaultSsimWeight = 0.2;

// Normalized 1D Gaussian taps of the SSIM window.
std::array<double, kSsimWindow> ssim_kernel();

double mse(const Image &a, const Image &b);

/// -10 log10(MSE), capped at 100 dB for identical images.
double psnr(const Image &a, const Image &b);

/// Mean SSIM over channels and window positions fully inside the image.
/// Along an axis shorter than the window, every position is used with the
/// window clipped to the image and renormalized.
double ssim(const Image &a, const Image &b);

struct LossResult {
    double value = 0.0;
    double l1 = 0.0;
    double ssim = 0.0;
    Image grad; // dL/d(render)
};

/**
 * (1 - w) * L1 + w * (1 - SSIM) / 2 with its analytic gradient.
 *
 * The SSIM term uses the zero-padded, same-size window filter of the usual
 * splatting training code, so every pixel contributes a window.
 */
LossResult photometric_loss(const Image &render, const Image &target, double ssim_weight = kDefaultSsimWeight);

// The SSIM term of photometric_loss on its own (zero-padded windows).
double ssim_same(const Image &a, const Image &b);

} // namespace swag
