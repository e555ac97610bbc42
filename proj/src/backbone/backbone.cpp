#include "mosaic/backbone/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "mosaic/synthdata/patchify.hpp"

namespace mosaic::backbone {

void BackboneConfig::validate() const {
  if (patch == 0 || canvas % patch != 0) throw ShapeError("backbone: canvas not divisible by patch");
  if (d == 0 || heads == 0 || d % heads != 0 || d % 2 != 0)
    throw ShapeError("backbone: width must be even and divisible by the head count");
  if (blocks() == 0) throw ShapeError("backbone: no blocks");
}

Tensor interpolate(const Tensor& x0, const Tensor& noise, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("interpolate: t outside [0, 1]");
  if (x0.shape() != noise.shape()) throw ShapeError("interpolate: shapes differ");
  const auto a = x0.data(), b = noise.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * a[i] + t * b[i];
  return Tensor(x0.shape(), std::move(out));
}

Tensor target_velocity(const Tensor& x0, const Tensor& noise) {
  if (x0.shape() != noise.shape()) throw ShapeError("target_velocity: shapes differ");
  const auto a = x0.data(), b = noise.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = b[i] - a[i];
  return Tensor(x0.shape(), std::move(out));
}

Backbone::Backbone(ParameterStore& store, const BackboneConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg.d, p2 = cfg.patch * cfg.patch;
  patch_in_ = nn::make_linear(store, "patch_in", p2, d, InitSpec::normal(1.0 / std::sqrt(static_cast<double>(p2))));
  pos_ = store.add("pos", {cfg.m(), d}, InitSpec::normal(0.02));
  text_table_ = store.add("text", {cfg.text_vocab, d}, InitSpec::normal(1.0));
  time_ = make_time_embedder(store, "time", d);
  for (std::size_t i = 0; i < cfg.double_blocks; ++i)
    dsb_.push_back(make_double_block(store, "dsb" + std::to_string(i), cfg.block(false)));
  for (std::size_t i = 0; i < cfg.single_blocks; ++i)
    ssb_.push_back(make_single_block(store, "ssb" + std::to_string(i), cfg.block(false)));
  final_mod_ = nn::make_linear(store, "final_mod", d, 2 * d, InitSpec::zero());
  head_ = nn::make_linear(store, "head", d, p2, InitSpec::zero());
}

Tensor Backbone::embed_text(std::span<const int> ids) const {
  if (ids.empty()) throw ShapeError("embed_text: no tokens");
  return ops::embedding(text_table_, ids);
}

Tensor Backbone::embed_image(const Tensor& z_t) const {
  if (z_t.shape() != Shape{cfg_.canvas, cfg_.canvas})
    throw ShapeError("backbone: input " + shape_str(z_t.shape()) + " does not match the canvas");
  return ops::add(patch_in_(synth::patchify(z_t, cfg_.patch)), pos_);
}

Tensor Backbone::forward(const Tensor& z_t, double t, const Tensor& y,
                         const ControlSignals* controls, ForwardCapture* capture) const {
  const std::size_t m = cfg_.m(), d = cfg_.d;
  if (controls) {
    if (controls->slots.size() != cfg_.blocks())
      throw ControlAlignmentError("backbone: " + std::to_string(controls->slots.size()) +
                                  " control slots for " + std::to_string(cfg_.blocks()) + " blocks");
    for (const auto& s : controls->slots)
      if (s.shape() != Shape{m, d}) throw ControlAlignmentError("backbone: control slot is not m x d");
  }
  if (y.cols() != d || y.rows() == 0) throw ShapeError("backbone: text tokens must be M x d");
  if (capture) capture->post_injection.clear();

  const Tensor vec = time_(t);
  Tensor img = embed_image(z_t);
  Tensor txt = y;
  std::size_t slot = 0;
  auto inject = [&](Tensor x) {
    if (controls) x = ops::add(x, controls->slots[slot]);
    if (capture) capture->post_injection.push_back(x);
    ++slot;
    return x;
  };

  for (const auto& b : dsb_) {
    auto out = b(img, txt, vec);
    img = inject(out.img);
    txt = out.txt;
  }
  const std::size_t nt = txt.rows();
  Tensor x = ops::concat_rows(txt, img);
  for (const auto& b : ssb_) {
    const Tensor next = b(x, vec).x;
    if (controls || capture) {
      x = ops::concat_rows(ops::slice_rows(next, 0, nt), inject(ops::slice_rows(next, nt, m)));
    } else {
      x = next;
    }
  }
  const auto fm = nn::chunk_row(final_mod_(ops::gelu(vec)), 2);
  const Tensor tokens = head_(nn::modulate(ops::slice_rows(x, nt, m), fm[0], fm[1]));
  return synth::unpatchify(tokens, cfg_.canvas, cfg_.canvas, cfg_.patch);
}

}  // namespace mosaic::backbone
