#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nire/attention.hpp"
#include "nire/layers.hpp"
#include "nire/serialize.hpp"
#include "nire/shutter.hpp"
#include "nire/task.hpp"
#include "nire/tensor.hpp"

namespace nire {

struct ModelConfig {
  int levels = 3;
  std::vector<int> channels = {16, 32, 64};
  int segments = 4;     // event segments M
  int bins = 5;         // voxel bins B
  int window = 4;       // attention window r
  int frequencies = 6;  // time-encoding frequency pairs F
  int attn_dim = 32;
  int heads = 2;
  int self_layers = 2;
  int ffn_mult = 2;
  int image_channels = 1;
  bool use_events = true;
  bool use_time_encodings = true;
  bool use_feature_enhancement = true;
  std::uint64_t seed = 1;
  DType dtype = DType::f32;

  /// Throws ConfigError for inconsistent settings.
  void validate() const;
  /// Throws ShapeError unless both dims are multiples of r * 2^(L-1).
  void check_image_size(int height, int width) const;
  int time_dim() const { return 4 * frequencies; }

  std::vector<double> encode() const;
  static ModelConfig decode(const std::vector<double>& values);
  bool operator==(const ModelConfig&) const = default;
};

/// Everything one forward pass consumes besides the desired shutter.
struct ModelInput {
  Tensor frames;  // [N, image_channels, H, W]
  Tensor voxels;  // [M, B, H, W]
  std::vector<sim::ShutterSpec> shutters;
  int height = 0;
  int width = 0;
};

ModelInput prepare_input(const sim::TaskSample& sample, const ModelConfig& config);

/// One recurrent level of the event encoder.
struct ConvLstm {
  Conv input;   // x -> 4C gates (i, f, o, g)
  Conv hidden;  // h -> 4C gates, no bias
  Conv fuse;    // merged directions -> C
  int channels = 0;
};

class NireModel {
 public:
  explicit NireModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const ParamSet& params() const { return params_; }
  std::int64_t parameter_count() const { return params_.count(); }

  /// Predicted [1, image_channels, H, W] image under `target`.
  Tensor forward(const ModelInput& input, const sim::ShutterSpec& target) const;

  /// Frames [N, Ci, H, W] -> L maps [N, C_l, H_l, W_l].
  std::vector<Tensor> encode_frames(const Tensor& frames) const;
  /// Voxels [M, B, H, W] -> L maps [M, C_l, H_l, W_l]; entry m is segment m.
  std::vector<Tensor> encode_events(const Tensor& voxels) const;
  /// Base colors broadcast to L maps [1, C_l, H_l, W_l].
  std::vector<Tensor> instantiate_film(int height, int width) const;
  /// Cross-level aggregation after self-attention layer `stage`; maps are [G, C_l, H_l, W_l].
  std::vector<Tensor> enhance(int stage, const std::vector<Tensor>& maps) const;
  /// Exposed film maps [1, C_l, H_l, W_l] -> [1, Ci, H, W] in (0, 1).
  Tensor decode(const std::vector<Tensor>& film) const;

  const AttentionBlock& self_block(int layer, int level) const;
  const AttentionBlock& cross_block(int level) const;
  Tensor film_base(int level) const { return film_base_[static_cast<std::size_t>(level)]; }
  Conv& enhance_conv(int stage, int level) { return enhance_conv_[idx(stage, level)]; }
  Conv& enhance_lateral(int stage, int level) { return enhance_lateral_[idx(stage, level)]; }

  /// Parameters plus "meta.config".
  NamedTensors state() const;
  /// Copies values into existing parameters. Throws ContractError on a
  /// config, name, or shape mismatch.
  void load_state(const NamedTensors& state);
  static NireModel from_state(const NamedTensors& state);

 private:
  std::size_t idx(int stage, int level) const {
    return static_cast<std::size_t>(stage) * static_cast<std::size_t>(config_.levels) + static_cast<std::size_t>(level);
  }
  Tensor run_lstm(const ConvLstm& cell, const Tensor& gates_x, bool reverse, std::vector<Tensor>& hidden) const;
  Tensor time_tokens(const std::vector<std::vector<double>>& segments, const std::vector<Tensor>& frame_maps,
                     const Tensor& film_map) const;

  ModelConfig config_;
  ParamSet params_;

  std::vector<std::vector<Conv>> frame_stages_;  // per level, two convs
  Conv event_head_;
  std::vector<Conv> event_down_;  // level l >= 1: C_{l-1} -> C_l
  std::vector<ConvLstm> event_cells_;
  std::vector<Tensor> film_base_;
  std::vector<AttentionBlock> self_blocks_;  // [layer][level] flattened
  std::vector<AttentionBlock> cross_blocks_;
  std::vector<Conv> enhance_conv_;     // [stage][level]
  std::vector<Conv> enhance_lateral_;  // [stage][level], unused on the coarsest level
  std::vector<std::vector<Conv>> decoder_stages_;
  std::vector<Conv> decoder_proj_;
  Conv decoder_out_;
};

/// Smallest configuration used for end-to-end gradient checks (8x8 input).
ModelConfig tiny_config();
/// Desk-scale training configuration (32x32 input).
ModelConfig desk_config();

}  // namespace nire
