#pragma once

#include <string>
#include <vector>

#include "mosaic/backbone/backbone.hpp"

namespace mosaic::timecontrol {

using backbone::ControlSignals;

// Trainable copy of the backbone's blocks (same count, same width) whose
// attention and feed-forward output projections start at zero, so every
// emitted residual is exactly zero until training moves them. The timestep
// embedding it owns is the O_t shared with patch scoring.
class ControlNet {
 public:
  ControlNet(ParameterStore& store, const backbone::BackboneConfig& cfg);

  std::size_t slots() const { return dsb_.size() + ssb_.size(); }

  // O_t, 1 x d. Throws std::domain_error unless t is in [0, 1].
  Tensor time_embed(double t) const { return time_(t); }

  // Runs SP_out (m x d) and the text tokens (M x d) through the blocks and
  // returns what each block added to the image stream.
  ControlSignals forward(const Tensor& sp_out, const Tensor& y, const Tensor& o_t) const;

  // Names of the parameters that start at zero.
  const std::vector<std::string>& zero_projections() const { return zero_names_; }

  // Copies every backbone parameter with a matching name except the zero
  // projections. Returns the number of tensors copied.
  std::size_t copy_from_backbone(const ParameterStore& backbone_store, ParameterStore& own) const;

 private:
  backbone::BackboneConfig cfg_;
  backbone::TimeEmbedder time_;
  std::vector<backbone::DoubleStreamBlock> dsb_;
  std::vector<backbone::SingleStreamBlock> ssb_;
  std::vector<std::string> zero_names_;
};

}  // namespace mosaic::timecontrol
