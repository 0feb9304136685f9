#pragma once

#include <cstdint>
#include <vector>

#include "nire/layers.hpp"
#include "nire/tensor.hpp"

namespace nire {

inline constexpr double kCharbonnierEps = 1e-3;

/// mean(sqrt((pred - gt)^2 + eps^2)).
Tensor charbonnier_loss(const Tensor& pred, const Tensor& gt, double eps = kCharbonnierEps);

/// Charbonnier distance between the activations of three frozen random
/// 3x3 conv + relu layers, averaged over the layers.
class FeatureLoss {
 public:
  explicit FeatureLoss(int image_channels = 1, DType dtype = DType::f32, std::uint64_t seed = 7, int width = 8);

  Tensor operator()(const Tensor& pred, const Tensor& gt, double eps = kCharbonnierEps) const;
  /// Feature maps of one image [N, C, H, W], shallow to deep.
  std::vector<Tensor> features(const Tensor& image) const;

 private:
  std::vector<Conv> layers_;
};

struct LossTerms {
  Tensor total;
  double charbonnier = 0.0;
  double feature = 0.0;
};

/// total = charbonnier + feature_weight * feature.
LossTerms reconstruction_loss(const Tensor& pred, const Tensor& gt, const FeatureLoss& features, double feature_weight,
                              double eps = kCharbonnierEps);

}  // namespace nire
