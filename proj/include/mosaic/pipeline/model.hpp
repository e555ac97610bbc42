#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/backbone/backbone.hpp"
#include "mosaic/pam/pam.hpp"
#include "mosaic/pipeline/fourier.hpp"
#include "mosaic/timecontrol/control.hpp"

namespace mosaic::pipeline {

struct ModelConfig {
  std::size_t d = 16;
  std::size_t heads = 2;
  std::size_t ff_mult = 4;
  std::size_t patch = 2;
  std::size_t double_blocks = 2;
  std::size_t single_blocks = 4;
  std::size_t n_p = 0;  // 0: canvas / patch
  std::uint64_t init_seed = 0;

  backbone::BackboneConfig backbone() const;
  pam::PamConfig pam() const;
  void validate() const;
};

// fresh: nothing trained. backbone: pretrained backbone, control stack still
// at its zero initialization. control: control phase has started.
enum class Stage { Fresh, Backbone, Control };
const char* stage_name(Stage s);
Stage parse_stage(const std::string& s);

// How SP_out is assembled during a controlled forward pass.
enum class Selection { Adaptive, Random };

struct ForwardOptions {
  Selection selection = Selection::Adaptive;
  Rng* random_rng = nullptr;  // required for Selection::Random
  std::optional<FourierOptions> fourier;
  const pam::SelectionTrace* replay = nullptr;
};

struct ControlledOutput {
  Tensor velocity;
  pam::SelectionTrace trace;
};

// Backbone, patch adapter and control network with one parameter store each.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  Stage stage() const { return stage_; }
  void set_stage(Stage s) { stage_ = s; }

  ParameterStore& backbone_store() { return *bb_store_; }
  ParameterStore& pam_store() { return *pam_store_; }
  ParameterStore& control_store() { return *ctl_store_; }
  const ParameterStore& backbone_store() const { return *bb_store_; }
  const ParameterStore& pam_store() const { return *pam_store_; }
  const ParameterStore& control_store() const { return *ctl_store_; }

  const backbone::Backbone& backbone() const { return *bb_; }
  const pam::PatchAdapter& pam() const { return *pam_; }
  const timecontrol::ControlNet& control() const { return *ctl_; }

  // Re-draws every parameter from cfg.init_seed and returns to Stage::Fresh.
  void initialize();
  // Re-initializes the PAM and control stores only, then copies the backbone
  // weights into the control blocks (their output projections stay zero).
  void reset_control();

  Tensor text(std::span<const int> ids) const { return bb_->embed_text(ids); }

  // V(z_t, t, Y) without any control.
  Tensor backbone_velocity(const Tensor& z_t, double t, const Tensor& y) const;
  // (V + V')(z_t, C, Y, t): PAM -> control network -> injected backbone.
  ControlledOutput controlled_velocity(const Tensor& z_t, double t, const Tensor& y,
                                       const std::vector<pam::ConditionInput>& conditions,
                                       const ForwardOptions& opts = {}) const;

 private:
  ModelConfig cfg_;
  Stage stage_ = Stage::Fresh;
  std::unique_ptr<ParameterStore> bb_store_, pam_store_, ctl_store_;
  std::unique_ptr<backbone::Backbone> bb_;
  std::unique_ptr<pam::PatchAdapter> pam_;
  std::unique_ptr<timecontrol::ControlNet> ctl_;
};

}  // namespace mosaic::pipeline
