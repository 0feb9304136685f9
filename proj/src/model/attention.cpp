#include "nire/attention.hpp"

#include <cmath>

#include "nire/error.hpp"
#include "nire/ops.hpp"

namespace nire {

Tensor window_partition(const Tensor& maps, int window) {
  if (maps.rank() != 4) throw ShapeError("window_partition expects [G, C, H, W]");
  const auto g = maps.dim(0), c = maps.dim(1), h = maps.dim(2), w = maps.dim(3);
  if (h % window || w % window) {
    throw ShapeError("feature map " + to_string(maps.shape()) + " not divisible by window " + std::to_string(window));
  }
  const auto r = static_cast<std::int64_t>(window);
  auto x = reshape(maps, {g, c, h / r, r, w / r, r});
  x = permute(x, {2, 4, 0, 3, 5, 1});
  return reshape(x, {(h / r) * (w / r), g * r * r, c});
}

Tensor window_reverse(const Tensor& tokens, int groups, int height, int width, int window) {
  const auto r = static_cast<std::int64_t>(window);
  if (height % window || width % window) throw ShapeError("window_reverse: size not divisible by window");
  const auto c = tokens.dim(2);
  if (tokens.dim(0) != (height / r) * (width / r) || tokens.dim(1) != groups * r * r) {
    throw ShapeError("window_reverse: token tensor " + to_string(tokens.shape()) + " does not match layout");
  }
  auto x = reshape(tokens, {height / r, width / r, groups, r, r, c});
  x = permute(x, {2, 5, 0, 3, 1, 4});
  return reshape(x, {groups, c, height, width});
}

namespace {

// [nW, T, d] -> [nW, heads, T, d / heads]
Tensor split_heads(const Tensor& x, int heads) {
  const auto nw = x.dim(0), t = x.dim(1), d = x.dim(2);
  return permute(reshape(x, {nw, t, heads, d / heads}), {0, 2, 1, 3});
}

Tensor merge_heads(const Tensor& x) {
  const auto nw = x.dim(0), h = x.dim(1), t = x.dim(2), dh = x.dim(3);
  return reshape(permute(x, {0, 2, 1, 3}), {nw, t, h * dh});
}

}  // namespace

Tensor time_aware_attention(const Tensor& queries, const Tensor& keys_values, const Tensor& query_times,
                            const Tensor& key_times, const AttentionWeights& w, const AttentionExtras& extras) {
  auto q_time = w.time(query_times);
  auto k_time = w.time(key_times);
  if (extras.query_time_mask.defined()) q_time = mul(q_time, extras.query_time_mask);
  if (extras.key_time_mask.defined()) k_time = mul(k_time, extras.key_time_mask);
  const auto q = add(w.query(queries), q_time);
  const auto k = add(w.key(keys_values), k_time);
  const auto v = w.value(keys_values);
  const auto d = q.dim(2);
  if (d % w.heads) throw ShapeError("attention dim not divisible by head count");

  const auto qh = split_heads(q, w.heads);
  const auto kh = split_heads(k, w.heads);
  const auto vh = split_heads(v, w.heads);
  auto scores = mul_scalar(matmul(qh, transpose(kh, -1, -2)), 1.0 / std::sqrt(static_cast<double>(d / w.heads)));
  if (extras.bias.defined()) scores = add(scores, extras.bias);
  const auto probs = softmax(scores, -1);
  if (extras.probabilities) *extras.probabilities = probs;
  return w.output(merge_heads(matmul(probs, vh)));
}

std::vector<std::int64_t> relative_position_index(int query_tokens, int key_tokens, int window, int heads) {
  const int r2 = window * window;
  const int side = 2 * window - 1;
  std::vector<std::int64_t> index(static_cast<std::size_t>(heads) * query_tokens * key_tokens);
  std::size_t k = 0;
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < query_tokens; ++i) {
      const int pi = i % r2;
      for (int j = 0; j < key_tokens; ++j) {
        const int pj = j % r2;
        const int dy = pi / window - pj / window + window - 1;
        const int dx = pi % window - pj % window + window - 1;
        index[k++] = static_cast<std::int64_t>(h) * side * side + dy * side + dx;
      }
    }
  }
  return index;
}

Tensor AttentionBlock::operator()(const Tensor& queries, const Tensor& keys_values, const Tensor& query_times,
                                  const Tensor& key_times, const Tensor& query_time_mask,
                                  const Tensor& key_time_mask) const {
  AttentionExtras extras;
  extras.query_time_mask = query_time_mask;
  extras.key_time_mask = key_time_mask;
  const auto tq = static_cast<int>(queries.dim(1));
  const auto tk = static_cast<int>(keys_values.dim(1));
  extras.bias = gather(position_table, relative_position_index(tq, tk, window, attention.heads),
                       {attention.heads, tq, tk});
  auto x = norm1(add(queries, time_aware_attention(queries, keys_values, query_times, key_times, attention, extras)));
  return norm2(add(x, ffn2(relu(ffn1(x)))));
}

AttentionBlock make_attention_block(ParamFactory& f, const std::string& prefix, int channels, int time_dim,
                                    int attn_dim, int heads, int window, int ffn_mult) {
  AttentionBlock b;
  b.window = window;
  b.attention.heads = heads;
  b.attention.query = f.linear(prefix + ".query", channels, attn_dim);
  b.attention.key = f.linear(prefix + ".key", channels, attn_dim);
  b.attention.value = f.linear(prefix + ".value", channels, attn_dim);
  b.attention.time = f.linear(prefix + ".time", time_dim, attn_dim);
  b.attention.output = f.linear(prefix + ".output", attn_dim, channels);
  const int side = 2 * window - 1;
  b.position_table = f.normal(prefix + ".position_bias", {heads, side * side}, 0.02);
  b.norm1 = f.norm(prefix + ".norm1", channels);
  b.ffn1 = f.linear(prefix + ".ffn1", channels, ffn_mult * channels, 2.0);
  b.ffn2 = f.linear(prefix + ".ffn2", ffn_mult * channels, channels);
  b.norm2 = f.norm(prefix + ".norm2", channels);
  return b;
}

}  // namespace nire
