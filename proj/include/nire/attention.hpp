#pragma once

#include <cstdint>
#include <vector>

#include "nire/layers.hpp"
#include "nire/tensor.hpp"

namespace nire {

/// [G, C, H, W] -> [nW, G*r*r, C]. Windows are row-major over the (H/r, W/r)
/// grid; tokens inside a window are ordered by group, then row, then column.
Tensor window_partition(const Tensor& maps, int window);
/// Inverse of window_partition.
Tensor window_reverse(const Tensor& tokens, int groups, int height, int width, int window);

/// Projections of one time-aware attention layer.
struct AttentionWeights {
  Linear query;
  Linear key;
  Linear value;
  Linear time;    // range encoding -> attention dim
  Linear output;  // attention dim -> token channels
  int heads = 1;
};

/// Optional per-call extras.
struct AttentionExtras {
  /// [heads, Tq, Tk] additive score bias; undefined for none.
  Tensor bias;
  /// [1, T, 1] multipliers on the projected time encodings; undefined keeps all.
  Tensor query_time_mask;
  Tensor key_time_mask;
  /// When set, receives the [nW, heads, Tq, Tk] attention probabilities.
  Tensor* probabilities = nullptr;
};

/// queries [nW, Tq, C] attend over keys_values [nW, Tk, C]. Time encodings
/// [nW, T, 4F] are projected and added to both queries and keys before the
/// scaled dot product. Returns [nW, Tq, C] (after the output projection).
Tensor time_aware_attention(const Tensor& queries, const Tensor& keys_values, const Tensor& query_times,
                            const Tensor& key_times, const AttentionWeights& w, const AttentionExtras& extras = {});

/// Flat indices into a [heads, (2r-1)^2] table giving the spatial-offset bias
/// between every query and key token of a window. Token k sits at in-window
/// position k mod r^2.
std::vector<std::int64_t> relative_position_index(int query_tokens, int key_tokens, int window, int heads);

/// Post-norm transformer block around time_aware_attention.
struct AttentionBlock {
  AttentionWeights attention;
  Tensor position_table;  // [heads, (2r-1)^2]
  Norm norm1;
  Norm norm2;
  Linear ffn1;
  Linear ffn2;
  int window = 1;

  /// x = norm1(q + attn(q, kv)); return norm2(x + ffn(x)).
  Tensor operator()(const Tensor& queries, const Tensor& keys_values, const Tensor& query_times,
                    const Tensor& key_times, const Tensor& query_time_mask = {},
                    const Tensor& key_time_mask = {}) const;
};

AttentionBlock make_attention_block(ParamFactory& f, const std::string& prefix, int channels, int time_dim,
                                    int attn_dim, int heads, int window, int ffn_mult);

}  // namespace nire
