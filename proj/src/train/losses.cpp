#include "nire/losses.hpp"

#include <cmath>

#include "nire/ops.hpp"

namespace nire {

Tensor charbonnier_loss(const Tensor& pred, const Tensor& gt, double eps) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("charbonnier: " + to_string(pred.shape()) + " vs " + to_string(gt.shape()));
  }
  if (!(eps > 0.0)) throw DomainError("charbonnier epsilon must be positive");
  return mean(sqrt(add_scalar(square(sub(pred, gt)), eps * eps)));
}

FeatureLoss::FeatureLoss(int image_channels, DType dtype, std::uint64_t seed, int width) {
  ParamSet scratch;
  ParamFactory f(scratch, seed, dtype);
  int in = image_channels;
  for (int i = 0; i < 3; ++i) {
    auto conv = f.conv("feature" + std::to_string(i), in, width, 3);
    conv.weight = conv.weight.detach();
    conv.bias = conv.bias.detach();
    layers_.push_back(conv);
    in = width;
  }
}

std::vector<Tensor> FeatureLoss::features(const Tensor& image) const {
  std::vector<Tensor> out;
  Tensor x = image;
  for (const auto& conv : layers_) {
    x = relu(conv(x));
    out.push_back(x);
  }
  return out;
}

Tensor FeatureLoss::operator()(const Tensor& pred, const Tensor& gt, double eps) const {
  if (pred.shape() != gt.shape()) throw ShapeError("feature loss: shape mismatch");
  const auto a = features(pred);
  const auto b = features(gt);
  Tensor total = charbonnier_loss(a[0], b[0], eps);
  for (std::size_t i = 1; i < a.size(); ++i) total = add(total, charbonnier_loss(a[i], b[i], eps));
  return mul_scalar(total, 1.0 / static_cast<double>(a.size()));
}

LossTerms reconstruction_loss(const Tensor& pred, const Tensor& gt, const FeatureLoss& features, double feature_weight,
                              double eps) {
  LossTerms t;
  const auto pixel = charbonnier_loss(pred, gt, eps);
  const auto feature = features(pred, gt.detach(), eps);
  t.charbonnier = pixel.item();
  t.feature = feature.item();
  t.total = add(pixel, mul_scalar(feature, feature_weight));
  return t;
}

}  // namespace nire
