#pragma once

#include <string>

#include "mosaic/numerics/nn.hpp"

namespace mosaic::pam {

struct IsbConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ff_mult = 4;
  double mod_init = 0.02;
  double score_init = 0.02;  // 0 gives a zero-initialized score head
};

// Image stream block used for patch scoring: modulated self-attention over the
// patch tokens, cross-attention to the text tokens and a feed-forward layer,
// each added through a gate taken from the timestep modulation. The score head
// maps every token to one scalar.
struct Isb {
  std::size_t heads = 1;
  nn::Linear mod;  // d -> 9d
  nn::Linear qkv;
  nn::Linear attn_out;
  nn::Linear cross_q;
  nn::Linear cross_kv;
  nn::Linear cross_out;
  nn::FeedForward ff;
  nn::Linear score;

  // x: m x d, o_t: 1 x d, y: M x d. Returns m x 1 scores.
  Tensor operator()(const Tensor& x, const Tensor& o_t, const Tensor& y) const;
};

Isb make_isb(ParameterStore& store, const std::string& name, const IsbConfig& cfg);

}  // namespace mosaic::pam
