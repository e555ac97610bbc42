#include "mosaic/pipeline/model.hpp"

namespace mosaic::pipeline {

backbone::BackboneConfig ModelConfig::backbone() const {
  backbone::BackboneConfig c;
  c.d = d;
  c.heads = heads;
  c.ff_mult = ff_mult;
  c.patch = patch;
  c.double_blocks = double_blocks;
  c.single_blocks = single_blocks;
  return c;
}

pam::PamConfig ModelConfig::pam() const {
  pam::PamConfig c;
  c.d = d;
  c.heads = heads;
  c.ff_mult = ff_mult;
  c.patch = patch;
  c.n_p = n_p;
  return c;
}

void ModelConfig::validate() const {
  backbone().validate();
  pam().validate();
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Fresh: return "fresh";
    case Stage::Backbone: return "backbone";
    case Stage::Control: return "control";
  }
  return "?";
}

Stage parse_stage(const std::string& s) {
  if (s == "fresh") return Stage::Fresh;
  if (s == "backbone") return Stage::Backbone;
  if (s == "control") return Stage::Control;
  throw std::invalid_argument("unknown stage: " + s);
}

Model::Model(const ModelConfig& cfg)
    : cfg_(cfg),
      bb_store_(std::make_unique<ParameterStore>()),
      pam_store_(std::make_unique<ParameterStore>()),
      ctl_store_(std::make_unique<ParameterStore>()) {
  cfg_.validate();
  bb_ = std::make_unique<backbone::Backbone>(*bb_store_, cfg_.backbone());
  pam_ = std::make_unique<pam::PatchAdapter>(*pam_store_, cfg_.pam());
  ctl_ = std::make_unique<timecontrol::ControlNet>(*ctl_store_, cfg_.backbone());
  initialize();
}

void Model::initialize() {
  bb_store_->initialize(derive_seed(cfg_.init_seed, 0));
  reset_control();
  stage_ = Stage::Fresh;
}

void Model::reset_control() {
  pam_store_->initialize(derive_seed(cfg_.init_seed, 1));
  ctl_store_->initialize(derive_seed(cfg_.init_seed, 2));
  ctl_->copy_from_backbone(*bb_store_, *ctl_store_);
}

Tensor Model::backbone_velocity(const Tensor& z_t, double t, const Tensor& y) const {
  return bb_->forward(z_t, t, y);
}

ControlledOutput Model::controlled_velocity(const Tensor& z_t, double t, const Tensor& y,
                                            const std::vector<pam::ConditionInput>& conditions,
                                            const ForwardOptions& opts) const {
  const Tensor o_t = ctl_->time_embed(t);
  pam::AdaptResult sel;
  if (opts.selection == Selection::Random) {
    if (!opts.random_rng) throw std::invalid_argument("random selection needs an RNG");
    sel = pam_->random_select(conditions, *opts.random_rng);
  } else {
    pam::AdaptOptions ao;
    ao.replay = opts.replay;
    sel = pam_->adapt(conditions, y, o_t, ao);
  }
  backbone::ControlSignals signals = ctl_->forward(sel.sp, y, o_t);
  if (opts.fourier)
    for (auto& s : signals.slots) s = fourier_correct(s, cfg_.backbone().grid(), t, *opts.fourier);
  return {bb_->forward(z_t, t, y, &signals), std::move(sel.trace)};
}

}  // namespace mosaic::pipeline
