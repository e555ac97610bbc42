#include "mosaic/backbone/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace mosaic::backbone {
namespace {

InitSpec fan_in(std::size_t in) { return InitSpec::normal(1.0 / std::sqrt(static_cast<double>(in))); }

InitSpec out_init(const BlockConfig& cfg, std::size_t in) {
  return cfg.zero_out ? InitSpec::zero() : fan_in(in);
}

void check_heads(const BlockConfig& cfg) {
  if (cfg.d == 0 || cfg.heads == 0 || cfg.d % cfg.heads != 0)
    throw ShapeError("block width must be a positive multiple of the head count");
}

struct Qkv {
  Tensor q, k, v;
};

Qkv split_qkv(const Tensor& t, std::size_t d) {
  return {ops::slice_cols(t, 0, d), ops::slice_cols(t, d, d), ops::slice_cols(t, 2 * d, d)};
}

}  // namespace

Tensor timestep_features(double t, std::size_t d) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("timestep outside [0, 1]");
  if (d < 2 || d % 2 != 0) throw ShapeError("timestep features need an even width");
  const std::size_t half = d / 2;
  std::vector<double> f(d);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    const double arg = 1000.0 * t * freq;
    f[i] = std::cos(arg);
    f[half + i] = std::sin(arg);
  }
  return Tensor({1, d}, std::move(f));
}

TimeEmbedder make_time_embedder(ParameterStore& store, const std::string& name, std::size_t d) {
  return {d, nn::make_linear(store, name + ".fc1", d, d, fan_in(d)),
          nn::make_linear(store, name + ".fc2", d, d, fan_in(d))};
}

Tensor TimeEmbedder::operator()(double t) const {
  return fc2(ops::gelu(fc1(timestep_features(t, d))));
}

DoubleStreamBlock make_double_block(ParameterStore& store, const std::string& name,
                                    const BlockConfig& cfg) {
  check_heads(cfg);
  const std::size_t d = cfg.d, hid = cfg.ff_mult * d;
  DoubleStreamBlock b;
  b.heads = cfg.heads;
  b.img_mod = nn::make_linear(store, name + ".img_mod", d, 6 * d, InitSpec::zero());
  b.txt_mod = nn::make_linear(store, name + ".txt_mod", d, 6 * d, InitSpec::zero());
  b.img_qkv = nn::make_linear(store, name + ".img_qkv", d, 3 * d, fan_in(d));
  b.txt_qkv = nn::make_linear(store, name + ".txt_qkv", d, 3 * d, fan_in(d));
  b.img_out = nn::make_linear(store, name + ".img_out", d, d, out_init(cfg, d));
  b.txt_out = nn::make_linear(store, name + ".txt_out", d, d, out_init(cfg, d));
  b.img_ff = nn::make_feed_forward(store, name + ".img_ff", d, hid, fan_in(d), out_init(cfg, hid));
  b.txt_ff = nn::make_feed_forward(store, name + ".txt_ff", d, hid, fan_in(d), out_init(cfg, hid));
  return b;
}

std::vector<std::string> double_block_out_names(const std::string& name) {
  std::vector<std::string> out;
  for (const char* p : {".img_out", ".txt_out", ".img_ff.out", ".txt_ff.out"}) {
    out.push_back(name + p + ".w");
    out.push_back(name + p + ".b");
  }
  return out;
}

SingleStreamBlock make_single_block(ParameterStore& store, const std::string& name,
                                    const BlockConfig& cfg) {
  check_heads(cfg);
  const std::size_t d = cfg.d, hid = cfg.ff_mult * d;
  SingleStreamBlock b;
  b.heads = cfg.heads;
  b.mod = nn::make_linear(store, name + ".mod", d, 3 * d, InitSpec::zero());
  b.qkv = nn::make_linear(store, name + ".qkv", d, 3 * d, fan_in(d));
  b.attn_out = nn::make_linear(store, name + ".attn_out", d, d, out_init(cfg, d));
  b.ff = nn::make_feed_forward(store, name + ".ff", d, hid, fan_in(d), out_init(cfg, hid));
  return b;
}

std::vector<std::string> single_block_out_names(const std::string& name) {
  return {name + ".attn_out.w", name + ".attn_out.b", name + ".ff.out.w", name + ".ff.out.b"};
}

DoubleStreamBlock::Output DoubleStreamBlock::operator()(const Tensor& img, const Tensor& txt,
                                                        const Tensor& vec) const {
  const std::size_t d = img.cols(), nt = txt.rows(), ni = img.rows();
  const Tensor act = ops::gelu(vec);
  const auto mi = nn::chunk_row(img_mod(act), 6);
  const auto mt = nn::chunk_row(txt_mod(act), 6);

  const Qkv qi = split_qkv(img_qkv(nn::modulate(img, mi[0], mi[1])), d);
  const Qkv qt = split_qkv(txt_qkv(nn::modulate(txt, mt[0], mt[1])), d);
  const Tensor a = ops::scaled_dot_product_attention(ops::concat_rows(qt.q, qi.q),
                                                     ops::concat_rows(qt.k, qi.k),
                                                     ops::concat_rows(qt.v, qi.v), heads);

  const Tensor img_a = ops::mul_row(img_out(ops::slice_rows(a, nt, ni)), mi[2]);
  const Tensor img_mid = ops::add(img, img_a);
  const Tensor img_f = ops::mul_row(img_ff(nn::modulate(img_mid, mi[3], mi[4])), mi[5]);

  const Tensor txt_a = ops::mul_row(txt_out(ops::slice_rows(a, 0, nt)), mt[2]);
  const Tensor txt_mid = ops::add(txt, txt_a);
  const Tensor txt_f = ops::mul_row(txt_ff(nn::modulate(txt_mid, mt[3], mt[4])), mt[5]);

  return {ops::add(img_mid, img_f), ops::add(txt_mid, txt_f), ops::add(img_a, img_f)};
}

SingleStreamBlock::Output SingleStreamBlock::operator()(const Tensor& x, const Tensor& vec) const {
  const std::size_t d = x.cols();
  const auto m = nn::chunk_row(mod(ops::gelu(vec)), 3);
  const Tensor h = nn::modulate(x, m[0], m[1]);
  const Qkv q = split_qkv(qkv(h), d);
  const Tensor a = attn_out(ops::scaled_dot_product_attention(q.q, q.k, q.v, heads));
  const Tensor delta = ops::mul_row(ops::add(a, ff(h)), m[2]);
  return {ops::add(x, delta), delta};
}

}  // namespace mosaic::backbone
