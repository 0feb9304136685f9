#include "nire/model.hpp"

#include <cmath>

#include "nire/error.hpp"
#include "nire/ops.hpp"
#include "nire/time_codec.hpp"
#include "nire/voxel.hpp"

namespace nire {

namespace {

constexpr double kConfigVersion = 1.0;

std::string level_name(const std::string& prefix, int level) { return prefix + ".level" + std::to_string(level + 1); }

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (levels < 1) fail("levels must be >= 1");
  if (static_cast<int>(channels.size()) != levels) fail("need one channel count per level");
  for (int l = 0; l < levels; ++l) {
    if (channels[l] < 1) fail("channel counts must be positive");
    if (l && channels[l] <= channels[l - 1]) fail("channel counts must be strictly increasing");
  }
  if (segments < 1) fail("segments must be >= 1");
  if (bins < 2) fail("bins must be >= 2");
  if (window < 1) fail("window must be >= 1");
  if (frequencies < 1) fail("frequencies must be >= 1");
  if (heads < 1 || attn_dim < heads || attn_dim % heads) fail("attn_dim must be a positive multiple of heads");
  if (self_layers < 1) fail("self_layers must be >= 1");
  if (ffn_mult < 1) fail("ffn_mult must be >= 1");
  if (image_channels < 1) fail("image_channels must be >= 1");
}

void ModelConfig::check_image_size(int height, int width) const {
  const int unit = window << (levels - 1);
  if (height <= 0 || width <= 0 || height % unit || width % unit) {
    throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) + " must be a multiple of " +
                     std::to_string(unit) + " in both dimensions");
  }
}

std::vector<double> ModelConfig::encode() const {
  std::vector<double> v = {kConfigVersion, static_cast<double>(levels)};
  for (int c : channels) v.push_back(c);
  for (int x : {segments, bins, window, frequencies, attn_dim, heads, self_layers, ffn_mult, image_channels}) {
    v.push_back(x);
  }
  for (bool b : {use_events, use_time_encodings, use_feature_enhancement}) v.push_back(b ? 1.0 : 0.0);
  v.push_back(static_cast<double>(seed));
  v.push_back(dtype == DType::f64 ? 1.0 : 0.0);
  return v;
}

ModelConfig ModelConfig::decode(const std::vector<double>& v) {
  if (v.size() < 2 || v[0] != kConfigVersion) throw FormatError("unrecognized model config record");
  ModelConfig c;
  c.levels = static_cast<int>(v[1]);
  if (c.levels < 1 || v.size() != static_cast<std::size_t>(2 + c.levels + 9 + 3 + 2)) {
    throw FormatError("model config record has the wrong length");
  }
  std::size_t i = 2;
  c.channels.assign(v.begin() + 2, v.begin() + 2 + c.levels);
  i += static_cast<std::size_t>(c.levels);
  for (int* field : {&c.segments, &c.bins, &c.window, &c.frequencies, &c.attn_dim, &c.heads, &c.self_layers,
                     &c.ffn_mult, &c.image_channels}) {
    *field = static_cast<int>(v[i++]);
  }
  for (bool* flag : {&c.use_events, &c.use_time_encodings, &c.use_feature_enhancement}) *flag = v[i++] != 0.0;
  c.seed = static_cast<std::uint64_t>(v[i++]);
  c.dtype = v[i] != 0.0 ? DType::f64 : DType::f32;
  c.validate();
  return c;
}

ModelInput prepare_input(const sim::TaskSample& sample, const ModelConfig& config) {
  if (sample.inputs.empty()) throw ContractError("task sample has no input frames");
  ModelInput in;
  in.height = sample.inputs.front().height;
  in.width = sample.inputs.front().width;
  std::vector<Tensor> frames;
  for (const auto& f : sample.inputs) {
    if (f.width != in.width || f.height != in.height || f.channels != config.image_channels) {
      throw ShapeError("input frames must share size and channel count");
    }
    frames.push_back(reshape(sim::frame_to_tensor(f, config.dtype), {1, f.channels, f.height, f.width}));
    in.shutters.push_back(f.shutter);
  }
  in.frames = concat(frames, 0);
  if (config.use_events) {
    if (sample.events.width != in.width || sample.events.height != in.height) {
      throw ShapeError("event sensor size does not match the frames");
    }
    in.voxels = sim::voxel_sequence(sample.events, config.segments, config.bins, config.dtype).stacked();
  }
  return in;
}

NireModel::NireModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& C = config_.channels;
  const int L = config_.levels;
  ParamFactory f(params_, config_.seed, config_.dtype);

  for (int l = 0; l < L; ++l) {
    const std::string p = "frame_encoder.stage" + std::to_string(l + 1);
    const int in = l == 0 ? config_.image_channels : C[l - 1];
    frame_stages_.push_back({f.conv(p + ".conv1", in, C[l], 3), f.conv(p + ".conv2", C[l], C[l], 3)});
  }

  if (config_.use_events) {
    event_head_ = f.conv("event_encoder.head", config_.bins, C[0], 3);
    for (int l = 0; l < L; ++l) {
      const std::string p = level_name("event_encoder", l);
      event_down_.push_back(l ? f.conv(p + ".down", C[l - 1], C[l], 3) : Conv{});
      ConvLstm cell;
      cell.channels = C[l];
      cell.input = f.conv(p + ".input", C[l], 4 * C[l], 3, true, 1.0);
      cell.hidden = f.conv(p + ".hidden", C[l], 4 * C[l], 1, false, 1.0);
      cell.fuse = f.conv(p + ".fuse", C[l], C[l], 1, true, 1.0);
      // Forget-gate bias of one keeps early gradients flowing through the cell state.
      dispatch(config_.dtype, [&]<class T>() {
        auto b = cell.input.bias.mutable_data<T>();
        for (int c = C[l]; c < 2 * C[l]; ++c) b[c] = T(1);
      });
      event_cells_.push_back(cell);
    }
  }

  for (int l = 0; l < L; ++l) film_base_.push_back(f.normal(level_name("film", l) + ".base", {C[l]}, 0.02));

  for (int s = 0; s < config_.self_layers; ++s) {
    for (int l = 0; l < L; ++l) {
      self_blocks_.push_back(make_attention_block(f, level_name("attention.self" + std::to_string(s + 1), l), C[l],
                                                  config_.time_dim(), config_.attn_dim, config_.heads, config_.window,
                                                  config_.ffn_mult));
    }
  }

  if (config_.use_feature_enhancement) {
    for (int s = 0; s + 1 < config_.self_layers; ++s) {
      for (int l = 0; l < L; ++l) {
        const std::string p = level_name("enhance.stage" + std::to_string(s + 1), l);
        enhance_conv_.push_back(f.identity_conv(p + ".conv", C[l], 3, 0.01));
        enhance_lateral_.push_back(l + 1 < L ? f.conv(p + ".lateral", C[l + 1], C[l], 1, true, 0.1) : Conv{});
      }
    }
  }

  for (int l = 0; l < L; ++l) {
    cross_blocks_.push_back(make_attention_block(f, level_name("attention.cross", l), C[l], config_.time_dim(),
                                                 config_.attn_dim, config_.heads, config_.window, config_.ffn_mult));
  }

  for (int l = 0; l < L; ++l) {
    const std::string p = level_name("decoder", l);
    decoder_stages_.push_back({f.conv(p + ".conv1", C[l], C[l], 3), f.conv(p + ".conv2", C[l], C[l], 3)});
    decoder_proj_.push_back(l ? f.conv(p + ".proj", C[l], C[l - 1], 1, true, 1.0) : Conv{});
  }
  decoder_out_ = f.conv("decoder.output", C[0], config_.image_channels, 3, true, 1.0);
}

const AttentionBlock& NireModel::self_block(int layer, int level) const { return self_blocks_.at(idx(layer, level)); }
const AttentionBlock& NireModel::cross_block(int level) const { return cross_blocks_.at(static_cast<std::size_t>(level)); }

std::vector<Tensor> NireModel::encode_frames(const Tensor& frames) const {
  if (frames.rank() != 4 || frames.dim(1) != config_.image_channels) {
    throw ShapeError("frame encoder expects [N, " + std::to_string(config_.image_channels) + ", H, W], got " +
                     to_string(frames.shape()));
  }
  config_.check_image_size(static_cast<int>(frames.dim(2)), static_cast<int>(frames.dim(3)));
  std::vector<Tensor> out;
  Tensor x = frames;
  for (int l = 0; l < config_.levels; ++l) {
    if (l) x = avg_pool2x(x);
    const auto& stage = frame_stages_[static_cast<std::size_t>(l)];
    x = relu(stage[1](relu(stage[0](x))));
    out.push_back(x);
  }
  return out;
}

Tensor NireModel::run_lstm(const ConvLstm& cell, const Tensor& gates_x, bool reverse,
                           std::vector<Tensor>& hidden) const {
  const auto steps = gates_x.dim(0);
  const auto c4 = gates_x.dim(1);
  const auto ch = c4 / 4;
  hidden.assign(static_cast<std::size_t>(steps), Tensor{});
  Tensor h, c;
  for (std::int64_t k = 0; k < steps; ++k) {
    const auto m = reverse ? steps - 1 - k : k;
    Tensor g = slice(gates_x, 0, m, m + 1);
    if (h.defined()) g = add(g, cell.hidden(h));
    const auto i = sigmoid(slice(g, 1, 0, ch));
    const auto f = sigmoid(slice(g, 1, ch, 2 * ch));
    const auto o = sigmoid(slice(g, 1, 2 * ch, 3 * ch));
    const auto u = tanh(slice(g, 1, 3 * ch, 4 * ch));
    c = c.defined() ? add(mul(f, c), mul(i, u)) : mul(i, u);
    h = mul(o, tanh(c));
    hidden[static_cast<std::size_t>(m)] = h;
  }
  return h;
}

std::vector<Tensor> NireModel::encode_events(const Tensor& voxels) const {
  if (!config_.use_events) throw ContractError("event encoder disabled in this configuration");
  if (voxels.rank() != 4 || voxels.dim(1) != config_.bins) {
    throw ShapeError("event encoder expects [M, " + std::to_string(config_.bins) + ", H, W], got " +
                     to_string(voxels.shape()));
  }
  config_.check_image_size(static_cast<int>(voxels.dim(2)), static_cast<int>(voxels.dim(3)));
  std::vector<Tensor> out;
  Tensor x = relu(event_head_(voxels));
  for (int l = 0; l < config_.levels; ++l) {
    const auto& cell = event_cells_[static_cast<std::size_t>(l)];
    if (l) x = relu(event_down_[static_cast<std::size_t>(l)](avg_pool2x(out.back())));
    const auto gates = cell.input(x);
    std::vector<Tensor> fwd, bwd;
    run_lstm(cell, gates, false, fwd);
    run_lstm(cell, gates, true, bwd);
    // Summing before the shared 1x1 fusion makes the merge symmetric in the
    // two directions.
    out.push_back(cell.fuse(add(concat(fwd, 0), concat(bwd, 0))));
  }
  return out;
}

std::vector<Tensor> NireModel::instantiate_film(int height, int width) const {
  config_.check_image_size(height, width);
  std::vector<Tensor> out;
  for (int l = 0; l < config_.levels; ++l) {
    const std::int64_t c = config_.channels[static_cast<std::size_t>(l)];
    const auto& base = film_base_[static_cast<std::size_t>(l)];
    out.push_back(broadcast_to(reshape(base, {1, c, 1, 1}), {1, c, height >> l, width >> l}));
  }
  return out;
}

std::vector<Tensor> NireModel::enhance(int stage, const std::vector<Tensor>& maps) const {
  if (!config_.use_feature_enhancement) return maps;
  std::vector<Tensor> out;
  const int L = config_.levels;
  for (int l = 0; l < L; ++l) {
    Tensor x = maps[static_cast<std::size_t>(l)];
    if (l + 1 < L) x = add(x, upsample_bilinear2x(enhance_lateral_[idx(stage, l)](maps[static_cast<std::size_t>(l + 1)])));
    out.push_back(enhance_conv_[idx(stage, l)](x));
  }
  return out;
}

Tensor NireModel::decode(const std::vector<Tensor>& film) const {
  Tensor y;
  for (int l = config_.levels - 1; l >= 0; --l) {
    Tensor x = film[static_cast<std::size_t>(l)];
    if (y.defined()) x = add(x, upsample_bilinear2x(decoder_proj_[static_cast<std::size_t>(l + 1)](y)));
    const auto& stage = decoder_stages_[static_cast<std::size_t>(l)];
    y = relu(stage[1](relu(stage[0](x))));
  }
  return sigmoid(decoder_out_(y));
}

Tensor NireModel::time_tokens(const std::vector<std::vector<double>>& segments, const std::vector<Tensor>& frame_maps,
                              const Tensor& film_map) const {
  const auto h = film_map.dim(0), w = film_map.dim(1), d = film_map.dim(2);
  const auto plane = static_cast<std::size_t>(h * w);
  std::vector<double> values;
  values.reserve((segments.size() + frame_maps.size() + 1) * plane * static_cast<std::size_t>(d));
  for (const auto& enc : segments) {
    for (double v : enc) values.insert(values.end(), plane, v);
  }
  auto append_map = [&](const Tensor& map) {
    // [H, W, D] -> channel-major [D, H, W]
    const auto m = map.to_vector();
    for (std::int64_t k = 0; k < d; ++k) {
      for (std::size_t p = 0; p < plane; ++p) values.push_back(m[p * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)]);
    }
  };
  for (const auto& map : frame_maps) append_map(map);
  append_map(film_map);
  const auto groups = static_cast<std::int64_t>(segments.size() + frame_maps.size() + 1);
  return window_partition(Tensor::from_values({groups, d, h, w}, values, config_.dtype), config_.window);
}

Tensor NireModel::forward(const ModelInput& input, const sim::ShutterSpec& target) const {
  const int H = input.height, W = input.width, L = config_.levels, r = config_.window;
  config_.check_image_size(H, W);
  if (input.shutters.size() != static_cast<std::size_t>(input.frames.dim(0))) {
    throw ContractError("one shutter per input frame is required");
  }
  target.validate(W, H);

  const Tensor frames = input.frames.dtype() == config_.dtype ? input.frames : input.frames.astype(config_.dtype);
  const auto frame_maps = encode_frames(frames);
  std::vector<Tensor> event_maps;
  if (config_.use_events) {
    if (!input.voxels.defined()) throw ContractError("model input has no voxel grids");
    event_maps = encode_events(input.voxels.dtype() == config_.dtype ? input.voxels : input.voxels.astype(config_.dtype));
  }
  const auto film = instantiate_film(H, W);
  const auto times = token_time_metadata(input.shutters, target, H, W, config_.segments, L, config_.frequencies,
                                         config_.dtype);
  static const std::vector<std::vector<double>> kNoSegments;
  const auto& segment_times = config_.use_events ? times.segments : kNoSegments;

  const int groups = static_cast<int>(segment_times.size() + frame_maps.front().dim(0)) + 1;
  const std::int64_t film_tokens = static_cast<std::int64_t>(r) * r;
  const std::int64_t total_tokens = groups * film_tokens;

  std::vector<Tensor> tokens, token_times, time_masks;
  for (int l = 0; l < L; ++l) {
    std::vector<Tensor> parts;
    if (config_.use_events) parts.push_back(event_maps[static_cast<std::size_t>(l)]);
    parts.push_back(frame_maps[static_cast<std::size_t>(l)]);
    parts.push_back(film[static_cast<std::size_t>(l)]);
    tokens.push_back(window_partition(concat(parts, 0), r));
    std::vector<Tensor> frame_time_maps;
    for (const auto& per_frame : times.frames) frame_time_maps.push_back(per_frame[static_cast<std::size_t>(l)]);
    token_times.push_back(time_tokens(segment_times, frame_time_maps, times.film[static_cast<std::size_t>(l)]));
  }
  Tensor self_mask, cross_key_mask;
  if (!config_.use_time_encodings) {
    // Only the film keeps its neural shutter.
    std::vector<double> m(static_cast<std::size_t>(total_tokens), 0.0);
    for (auto k = total_tokens - film_tokens; k < total_tokens; ++k) m[static_cast<std::size_t>(k)] = 1.0;
    self_mask = Tensor::from_values({1, total_tokens, 1}, m, config_.dtype);
    cross_key_mask = Tensor::zeros({1, total_tokens - film_tokens, 1}, config_.dtype);
  }

  for (int s = 0; s < config_.self_layers; ++s) {
    for (int l = 0; l < L; ++l) {
      auto& z = tokens[static_cast<std::size_t>(l)];
      const auto& t = token_times[static_cast<std::size_t>(l)];
      z = self_block(s, l)(z, z, t, t, self_mask, self_mask);
    }
    if (config_.use_feature_enhancement && s + 1 < config_.self_layers) {
      std::vector<Tensor> maps;
      for (int l = 0; l < L; ++l) maps.push_back(window_reverse(tokens[static_cast<std::size_t>(l)], groups, H >> l, W >> l, r));
      maps = enhance(s, maps);
      for (int l = 0; l < L; ++l) tokens[static_cast<std::size_t>(l)] = window_partition(maps[static_cast<std::size_t>(l)], r);
    }
  }

  std::vector<Tensor> exposed;
  for (int l = 0; l < L; ++l) {
    const auto& z = tokens[static_cast<std::size_t>(l)];
    const auto& t = token_times[static_cast<std::size_t>(l)];
    const auto split = total_tokens - film_tokens;
    const auto film_z = slice(z, 1, split, total_tokens);
    const auto film_t = slice(t, 1, split, total_tokens);
    const auto out = cross_block(l)(film_z, slice(z, 1, 0, split), film_t, slice(t, 1, 0, split), Tensor{},
                                    cross_key_mask);
    exposed.push_back(window_reverse(out, 1, H >> l, W >> l, r));
  }
  return decode(exposed);
}

NamedTensors NireModel::state() const {
  NamedTensors out;
  for (const auto& [name, t] : params_.entries()) out.emplace_back(name, t.detach());
  const auto meta = config_.encode();
  out.emplace_back("meta.config", Tensor::from_values({static_cast<std::int64_t>(meta.size())}, meta, DType::f64));
  return out;
}

void NireModel::load_state(const NamedTensors& state) {
  const auto& mine = params_.entries();
  std::size_t matched = 0;
  for (const auto& [name, src] : state) {
    if (name == "meta.config") {
      if (!(ModelConfig::decode(src.to_vector()) == config_)) throw ContractError("checkpoint config differs from model");
      continue;
    }
    if (name.rfind("optim.", 0) == 0) continue;
    Tensor dst = params_.find(name);
    if (dst.shape() != src.shape()) throw ContractError("shape mismatch for parameter " + name);
    const auto values = src.to_vector();
    dispatch(dst.dtype(), [&]<class T>() {
      auto d = dst.mutable_data<T>();
      for (std::size_t i = 0; i < values.size(); ++i) d[i] = static_cast<T>(values[i]);
    });
    ++matched;
  }
  if (matched != mine.size()) throw ContractError("checkpoint is missing model parameters");
}

NireModel NireModel::from_state(const NamedTensors& state) {
  for (const auto& [name, t] : state) {
    if (name == "meta.config") {
      NireModel m(ModelConfig::decode(t.to_vector()));
      m.load_state(state);
      return m;
    }
  }
  throw FormatError("checkpoint has no meta.config entry");
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.levels = 2;
  c.channels = {3, 4};
  c.segments = 2;
  c.bins = 2;
  c.window = 2;
  c.frequencies = 1;
  c.attn_dim = 4;
  c.heads = 1;
  c.self_layers = 2;
  c.dtype = DType::f64;
  return c;
}

ModelConfig desk_config() { return ModelConfig{}; }

}  // namespace nire
