#pragma once

#include <string>

#include "mosaic/numerics/nn.hpp"

namespace mosaic::backbone {

struct BlockConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ff_mult = 4;
  // Zero-initialized attention and feed-forward output projections make the
  // whole block an exact identity until they are trained.
  bool zero_out = false;
};

// Sinusoidal features of t (scaled by 1000) followed by a two-layer GELU map.
struct TimeEmbedder {
  std::size_t d = 0;
  nn::Linear fc1;
  nn::Linear fc2;

  // Throws std::domain_error unless t is in [0, 1]. Returns 1 x d.
  Tensor operator()(double t) const;
};

TimeEmbedder make_time_embedder(ParameterStore& store, const std::string& name, std::size_t d);

// 1 x d sinusoidal features (cosines then sines).
Tensor timestep_features(double t, std::size_t d);

// Separate image and text weights; both streams meet in one joint attention
// (text tokens first).
struct DoubleStreamBlock {
  std::size_t heads = 1;
  nn::Linear img_mod, txt_mod;  // d -> 6d
  nn::Linear img_qkv, txt_qkv;
  nn::Linear img_out, txt_out;
  nn::FeedForward img_ff, txt_ff;

  struct Output {
    Tensor img;
    Tensor txt;
    Tensor img_delta;  // what the block added to the image stream
  };
  Output operator()(const Tensor& img, const Tensor& txt, const Tensor& vec) const;
};

// One stream over [text; image] rows with parallel attention and feed-forward
// branches sharing one gate.
struct SingleStreamBlock {
  std::size_t heads = 1;
  nn::Linear mod;  // d -> 3d
  nn::Linear qkv;
  nn::Linear attn_out;
  nn::FeedForward ff;

  struct Output {
    Tensor x;
    Tensor delta;
  };
  Output operator()(const Tensor& x, const Tensor& vec) const;
};

DoubleStreamBlock make_double_block(ParameterStore& store, const std::string& name,
                                    const BlockConfig& cfg);
SingleStreamBlock make_single_block(ParameterStore& store, const std::string& name,
                                    const BlockConfig& cfg);

// Parameter names of the output projections that zero_out clears.
std::vector<std::string> double_block_out_names(const std::string& name);
std::vector<std::string> single_block_out_names(const std::string& name);

}  // namespace mosaic::backbone
