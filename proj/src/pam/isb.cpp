#include "mosaic/pam/isb.hpp"

#include <cmath>

namespace mosaic::pam {

Isb make_isb(ParameterStore& store, const std::string& name, const IsbConfig& cfg) {
  const std::size_t d = cfg.d;
  if (cfg.heads == 0 || d % cfg.heads != 0) throw ShapeError("isb: width not divisible by heads");
  const auto w = InitSpec::normal(1.0 / std::sqrt(static_cast<double>(d)));
  Isb b;
  b.heads = cfg.heads;
  b.mod = nn::make_linear(store, name + ".mod", d, 9 * d, InitSpec::normal(cfg.mod_init));
  b.qkv = nn::make_linear(store, name + ".qkv", d, 3 * d, w);
  b.attn_out = nn::make_linear(store, name + ".attn_out", d, d, w);
  b.cross_q = nn::make_linear(store, name + ".cross_q", d, d, w);
  b.cross_kv = nn::make_linear(store, name + ".cross_kv", d, 2 * d, w);
  b.cross_out = nn::make_linear(store, name + ".cross_out", d, d, w);
  b.ff = nn::make_feed_forward(store, name + ".ff", d, cfg.ff_mult * d, w,
                               InitSpec::normal(1.0 / std::sqrt(static_cast<double>(cfg.ff_mult * d))));
  b.score = nn::make_linear(store, name + ".score", d, 1,
                            cfg.score_init > 0 ? InitSpec::normal(cfg.score_init) : InitSpec::zero());
  return b;
}

Tensor Isb::operator()(const Tensor& x_in, const Tensor& o_t, const Tensor& y) const {
  const std::size_t d = x_in.cols();
  const auto m = nn::chunk_row(mod(ops::gelu(o_t)), 9);
  Tensor x = x_in;

  Tensor h = nn::modulate(x, m[0], m[1]);
  const Tensor qkv_h = qkv(h);
  const Tensor a = nn::attention(ops::slice_cols(qkv_h, 0, d), ops::slice_cols(qkv_h, d, d),
                                 ops::slice_cols(qkv_h, 2 * d, d), attn_out, heads);
  x = ops::add(x, ops::mul_row(a, m[2]));

  h = nn::modulate(x, m[3], m[4]);
  const Tensor kv = cross_kv(y);
  const Tensor c = nn::attention(cross_q(h), ops::slice_cols(kv, 0, d), ops::slice_cols(kv, d, d),
                                 cross_out, heads);
  x = ops::add(x, ops::mul_row(c, m[5]));

  h = nn::modulate(x, m[6], m[7]);
  x = ops::add(x, ops::mul_row(ff(h), m[8]));
  return score(ops::layer_norm(x));
}

}  // namespace mosaic::pam
