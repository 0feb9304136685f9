#include "nire/metrics.hpp"

#include <array>
#include <cmath>

#include "nire/error.hpp"

namespace nire {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

void check_pair(const sim::Frame& a, const sim::Frame& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ShapeError("metric inputs differ in size");
  }
  if (a.pixels.empty()) throw ShapeError("metric inputs are empty");
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> w{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace

double mean_squared_error(const sim::Frame& pred, const sim::Frame& gt) {
  check_pair(pred, gt);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const double d = pred.pixels[i] - gt.pixels[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.pixels.size());
}

double psnr_from_mse(double mse) {
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double psnr(const sim::Frame& pred, const sim::Frame& gt) { return psnr_from_mse(mean_squared_error(pred, gt)); }

double ssim(const sim::Frame& pred, const sim::Frame& gt) {
  check_pair(pred, gt);
  if (pred.width < kWindow || pred.height < kWindow) throw ShapeError("ssim needs at least 11x11 pixels");
  const auto taps = gaussian_taps();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int out_h = pred.height - kWindow + 1, out_w = pred.width - kWindow + 1;
  double total = 0.0;
  for (int c = 0; c < pred.channels; ++c) {
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < kWindow; ++i) {
          for (int j = 0; j < kWindow; ++j) {
            const double w = taps[i] * taps[j];
            const double a = pred.at(c, y + i, x + j), b = gt.at(c, y + i, x + j);
            mx += w * a;
            my += w * b;
            xx += w * a * a;
            yy += w * b * b;
            xy += w * a * b;
          }
        }
        const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
  }
  return total / (static_cast<double>(out_h) * out_w * pred.channels);
}

ImageScores score_images(const sim::Frame& pred, const sim::Frame& gt) {
  ImageScores s;
  s.mse = mean_squared_error(pred, gt);
  s.psnr = psnr_from_mse(s.mse);
  s.ssim = ssim(pred, gt);
  return s;
}

}  // namespace nire
