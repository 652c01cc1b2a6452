#pragma once

#include "snnsir/blocks.hpp"
#include "snnsir/tensor.hpp"

namespace snnsir {

double mse(const Tensor& a, const Tensor& b);

/// 10 log10(1 / MSE) for images in [0,1]; identical images report the 100 dB
/// cap. Inputs are clipped into [0,1] first.
double psnr(const Tensor& a, const Tensor& b);

/// Standard windowed SSIM: 11x11 Gaussian (sigma 1.5), K1=0.01, K2=0.03,
/// valid-region windows, averaged over channels.
double ssim(const Tensor& a, const Tensor& b);

// Stereo scores are the average of the two views.
double psnr_pair(const StereoPair& a, const StereoPair& b);
double ssim_pair(const StereoPair& a, const StereoPair& b);

}  // namespace snnsir
