#pragma once

#include <span>
#include <vector>

#include "mosaic/backbone/blocks.hpp"
#include "mosaic/synthdata/scene.hpp"

namespace mosaic::backbone {

struct BackboneConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ff_mult = 4;
  std::size_t patch = 2;
  std::size_t canvas = synth::kCanvas;
  std::size_t double_blocks = 2;
  std::size_t single_blocks = 4;
  std::size_t text_vocab = synth::kTextVocab;

  std::size_t grid() const { return canvas / patch; }
  std::size_t m() const { return grid() * grid(); }
  std::size_t blocks() const { return double_blocks + single_blocks; }
  BlockConfig block(bool zero_out) const { return {d, heads, ff_mult, zero_out}; }
  void validate() const;
};

// One m x d residual per backbone block; slot k is added to block k's
// image-stream output before block k + 1 runs.
struct ControlSignals {
  std::vector<Tensor> slots;
};

struct ControlAlignmentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// z_t = (1 - t) x0 + t noise. Throws std::domain_error for t outside [0, 1]
// and ShapeError for mismatched shapes.
Tensor interpolate(const Tensor& x0, const Tensor& noise, double t);

// noise - x0.
Tensor target_velocity(const Tensor& x0, const Tensor& noise);

// Image stream after each block, after any control residual was added.
struct ForwardCapture {
  std::vector<Tensor> post_injection;
};

// Rectified-flow transformer on patchified pixels: two double-stream blocks
// over (image, text) followed by single-stream blocks over [text; image].
// Text tokens carry no positional embedding.
class Backbone {
 public:
  Backbone(ParameterStore& store, const BackboneConfig& cfg);

  const BackboneConfig& config() const { return cfg_; }

  // M x d text tokens from the learned table.
  Tensor embed_text(std::span<const int> ids) const;
  Tensor embed_image(const Tensor& z_t) const;
  Tensor time_vector(double t) const { return time_(t); }

  // Velocity prediction with the shape of z_t (canvas x canvas).
  Tensor forward(const Tensor& z_t, double t, const Tensor& y,
                 const ControlSignals* controls = nullptr, ForwardCapture* capture = nullptr) const;

 private:
  BackboneConfig cfg_;
  nn::Linear patch_in_;
  Tensor pos_;
  Tensor text_table_;
  TimeEmbedder time_;
  std::vector<DoubleStreamBlock> dsb_;
  std::vector<SingleStreamBlock> ssb_;
  nn::Linear final_mod_;  // d -> 2d
  nn::Linear head_;       // d -> p^2
};

}  // namespace mosaic::backbone
