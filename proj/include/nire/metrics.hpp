#pragma once

#include "nire/frame.hpp"

namespace nire {

inline constexpr double kPsnrCap = 99.0;

double mean_squared_error(const sim::Frame& pred, const sim::Frame& gt);
/// -10 log10(MSE), capped at kPsnrCap once MSE drops below 1e-10.
double psnr_from_mse(double mse);
double psnr(const sim::Frame& pred, const sim::Frame& gt);
/// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, range 1) over
/// the valid region, averaged over channels. Frames need at least 11x11 pixels.
double ssim(const sim::Frame& pred, const sim::Frame& gt);

struct ImageScores {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

/// All image metrics from one pass; psnr derives from the same MSE.
ImageScores score_images(const sim::Frame& pred, const sim::Frame& gt);

}  // namespace nire
