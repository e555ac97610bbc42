#include "mosaic/pipeline/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mosaic/numerics/tape.hpp"
#include "mosaic/pipeline/config_json.hpp"

namespace mosaic::pipeline {
namespace {

constexpr const char* kOptMagic = "mosaic-adamw";
constexpr std::uint32_t kOptVersion = 1;
constexpr int kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("optimizer state truncated");
  return v;
}

std::vector<ParameterStore*> trained_stores(Model& model, Phase phase) {
  if (phase == Phase::Backbone) return {&model.backbone_store()};
  return {&model.pam_store(), &model.control_store()};
}

void set_trainable(Model& model, Phase phase) {
  model.backbone_store().set_requires_grad(phase == Phase::Backbone);
  model.pam_store().set_requires_grad(phase == Phase::Control);
  model.control_store().set_requires_grad(phase == Phase::Control);
}

}  // namespace

const char* phase_name(Phase p) { return p == Phase::Backbone ? "backbone" : "control"; }

Phase parse_phase(const std::string& s) {
  if (s == "backbone") return Phase::Backbone;
  if (s == "control") return Phase::Control;
  throw std::invalid_argument("unknown phase: " + s);
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be > 0");
  if (batch == 0) throw std::invalid_argument("batch size must be >= 1");
  if (steps == 0) throw std::invalid_argument("steps must be >= 1");
  if (fourier && !(fourier->alpha >= 0.0)) throw std::invalid_argument("fourier alpha must be >= 0");
}

AdamW::AdamW(std::vector<ParameterStore*> stores) : stores_(std::move(stores)) {
  for (auto* s : stores_)
    for (const auto& e : s->entries()) {
      m_.emplace_back(e.tensor.size(), 0.0);
      v_.emplace_back(e.tensor.size(), 0.0);
    }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  std::size_t slot = 0;
  for (auto* s : stores_)
    for (const auto& e : s->entries()) {
      Tensor p = e.tensor;
      auto& m = m_[slot];
      auto& v = v_[slot];
      ++slot;
      auto w = p.mutable_data();
      const auto g = p.grad();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g.empty() ? 0.0 : g[i];
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
        const double upd = (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps) + kWeightDecay * w[i];
        w[i] = static_cast<double>(static_cast<float>(w[i] - lr * upd));
      }
    }
}

void AdamW::write(std::ostream& os) const {
  os.write(kOptMagic, static_cast<std::streamsize>(std::strlen(kOptMagic)));
  put<std::uint32_t>(os, kOptVersion);
  put<std::uint64_t>(os, t_);
  put<std::uint64_t>(os, m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    put<std::uint64_t>(os, m_[i].size());
    os.write(reinterpret_cast<const char*>(m_[i].data()), static_cast<std::streamsize>(m_[i].size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(v_[i].data()), static_cast<std::streamsize>(v_[i].size() * sizeof(double)));
  }
}

void AdamW::read(std::istream& is) {
  std::string magic(std::strlen(kOptMagic), '\0');
  if (!is.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kOptMagic)
    throw CheckpointError("optimizer state: bad magic");
  if (get<std::uint32_t>(is) != kOptVersion) throw CheckpointError("optimizer state: unsupported version");
  const auto t = get<std::uint64_t>(is);
  if (get<std::uint64_t>(is) != m_.size()) throw CheckpointError("optimizer state: tensor count mismatch");
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (get<std::uint64_t>(is) != m_[i].size()) throw CheckpointError("optimizer state: size mismatch");
    const auto bytes = static_cast<std::streamsize>(m_[i].size() * sizeof(double));
    if (!is.read(reinterpret_cast<char*>(m_[i].data()), bytes) ||
        !is.read(reinterpret_cast<char*>(v_[i].data()), bytes))
      throw CheckpointError("optimizer state truncated");
  }
  t_ = t;
}

std::vector<synth::ConditionKind> dropout_conditions(const synth::ImageSample& s, Rng& rng) {
  const bool keep_keypoint = !s.spec.objects.empty();
  const std::size_t choices = keep_keypoint ? 3 : 4;
  const std::size_t drop = std::uniform_int_distribution<std::size_t>(0, choices - 1)(rng);
  std::vector<synth::ConditionKind> out;
  for (std::size_t k = 0; k < synth::kNumConditions; ++k)
    if (k != drop) out.push_back(synth::kAllConditions[k]);
  return out;
}

std::vector<pam::ConditionInput> condition_inputs(const synth::ImageSample& s,
                                                  const std::vector<synth::ConditionKind>& kinds) {
  std::vector<pam::ConditionInput> out;
  for (auto k : kinds) out.push_back({k, s.condition(k)});
  return out;
}

Tensor flow_loss(const Tensor& prediction, const Tensor& target) {
  return ops::sum_squares(ops::sub(target, prediction));
}

TrainItem draw_item(const std::vector<synth::ImageSample>& data, Rng& rng, bool dropout) {
  if (data.empty()) throw std::invalid_argument("training data is empty");
  TrainItem item;
  item.sample = &data[std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng)];
  item.t = 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const Shape shape = item.sample->image.shape();
  std::vector<double> noise(shape_numel(shape));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : noise) v = normal(rng);
  item.noise = Tensor(shape, std::move(noise));
  if (dropout)
    item.conditions = dropout_conditions(*item.sample, rng);
  else
    item.conditions.assign(synth::kAllConditions.begin(), synth::kAllConditions.end());
  return item;
}

Tensor item_loss(const Model& model, Phase phase, const TrainItem& item,
                 const std::optional<FourierOptions>& fourier) {
  const auto& s = *item.sample;
  const Tensor z_t = backbone::interpolate(s.image, item.noise, item.t);
  const Tensor target = backbone::target_velocity(s.image, item.noise);
  const Tensor y = model.text(s.text);
  if (phase == Phase::Backbone) return flow_loss(model.backbone_velocity(z_t, item.t, y), target);
  ForwardOptions opts;
  opts.fourier = fourier;
  const auto out = model.controlled_velocity(z_t, item.t, y, condition_inputs(s, item.conditions), opts);
  return flow_loss(out.velocity, target);
}

Tensor batch_loss(const Model& model, Phase phase, const std::vector<TrainItem>& items,
                  const std::optional<FourierOptions>& fourier) {
  if (items.empty()) throw std::invalid_argument("batch_loss: empty batch");
  Tensor total = item_loss(model, phase, items[0], fourier);
  for (std::size_t i = 1; i < items.size(); ++i) total = ops::add(total, item_loss(model, phase, items[i], fourier));
  return ops::scale(total, 1.0 / static_cast<double>(items.size()));
}

bool DivergenceMonitor::update(double loss) {
  if (seen++ == 0) initial = loss;
  above = loss > kDivergenceFactor * initial ? above + 1 : 0;
  return above >= kDivergenceWindow;
}

TrainState::TrainState(Model& model, const TrainConfig& c)
    : cfg(c), rng(derive_seed(c.seed, 0x747261696eULL)), optimizer(trained_stores(model, c.phase)) {}

TrainState begin_training(Model& model, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.phase == Phase::Backbone) {
    if (model.stage() == Stage::Control)
      throw PhaseError("backbone phase cannot follow the control phase");
    model.set_stage(Stage::Backbone);
  } else {
    if (model.stage() == Stage::Fresh)
      throw PhaseError("control phase needs a pretrained backbone checkpoint");
    if (model.stage() == Stage::Backbone) model.reset_control();
    model.set_stage(Stage::Control);
  }
  return TrainState(model, cfg);
}

void train_steps(Model& model, TrainState& state, const std::vector<synth::ImageSample>& data,
                 std::size_t count, const StepCallback& on_step) {
  const auto& cfg = state.cfg;
  const Stage want = cfg.phase == Phase::Backbone ? Stage::Backbone : Stage::Control;
  if (model.stage() != want) throw PhaseError("model stage does not match the training phase");
  set_trainable(model, cfg.phase);
  const auto stores = trained_stores(model, cfg.phase);
  const double inv_b = 1.0 / static_cast<double>(cfg.batch);

  for (std::size_t n = 0; n < count && state.step < cfg.steps; ++n) {
    for (auto* s : stores) s->zero_grad();
    std::vector<TrainItem> items;
    for (std::size_t b = 0; b < cfg.batch; ++b) items.push_back(draw_item(data, state.rng, cfg.condition_dropout));
    double total = 0.0;
    for (const auto& item : items) {
      const Tensor l = item_loss(model, cfg.phase, item, cfg.fourier);
      total += l.item();
      backward(ops::scale(l, inv_b));
    }
    const double loss = total * inv_b;
    if (!std::isfinite(loss))
      throw NonFiniteError("training loss is not finite at step " + std::to_string(state.step + 1));
    state.optimizer.step(cfg.lr);
    const bool diverged = state.divergence.update(loss);
    state.losses.push_back(loss);
    ++state.step;
    if (on_step) on_step(state.step, loss);
    if (diverged) {
      std::ostringstream msg;
      msg << std::setprecision(6) << "training diverged: loss " << loss << " at step " << state.step
          << " has exceeded " << kDivergenceFactor << "x the initial loss " << state.divergence.initial
          << " for " << state.divergence.above << " consecutive steps";
      throw DivergenceError(msg.str());
    }
  }
  for (auto* s : stores) s->zero_grad();
}

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const TrainState* state) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "params.bin", std::ios::binary);
    if (!os) throw CheckpointError("cannot write " + (dir / "params.bin").string());
    write_container(os, {{"backbone", &model.backbone_store()},
                         {"pam", &model.pam_store()},
                         {"control", &model.control_store()}});
    if (!os) throw CheckpointError("write failed: " + (dir / "params.bin").string());
  }
  Json meta = {{"format", "mosaic-checkpoint"},
               {"version", kCheckpointVersion},
               {"model", to_json(model.config())},
               {"stage", stage_name(model.stage())}};
  if (state) {
    std::ostringstream rng;
    rng << state->rng;
    meta["train"] = to_json(state->cfg);
    meta["step"] = state->step;
    meta["seed"] = state->cfg.seed;
    meta["rng"] = rng.str();
    meta["losses"] = state->losses;
    meta["divergence"] = {{"initial", state->divergence.initial},
                          {"seen", state->divergence.seen},
                          {"above", state->divergence.above}};
    std::ofstream os(dir / "optimizer.bin", std::ios::binary);
    state->optimizer.write(os);
    if (!os) throw CheckpointError("write failed: " + (dir / "optimizer.bin").string());
  } else {
    std::filesystem::remove(dir / "optimizer.bin");
  }
  std::ofstream os(dir / "meta.json");
  os << meta.dump(2) << '\n';
  if (!os) throw CheckpointError("write failed: " + (dir / "meta.json").string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "meta.json");
  if (!ms) throw CheckpointError("missing checkpoint: " + (dir / "meta.json").string());
  Json meta;
  try {
    meta = Json::parse(ms);
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("meta.json: ") + e.what());
  }
  if (meta.value("format", "") != "mosaic-checkpoint" || meta.value("version", 0) != kCheckpointVersion)
    throw CheckpointError("meta.json: not a version " + std::to_string(kCheckpointVersion) + " checkpoint");

  LoadedCheckpoint out;
  out.model = std::make_unique<Model>(model_config_from_json(meta.at("model")));
  {
    std::ifstream is(dir / "params.bin", std::ios::binary);
    if (!is) throw CheckpointError("missing " + (dir / "params.bin").string());
    try {
      read_container(is, {{"backbone", &out.model->backbone_store()},
                          {"pam", &out.model->pam_store()},
                          {"control", &out.model->control_store()}});
    } catch (const FormatError& e) {
      throw CheckpointError(std::string("params.bin: ") + e.what());
    }
  }
  out.model->set_stage(parse_stage(meta.at("stage").get<std::string>()));

  if (meta.contains("train")) {
    TrainConfig cfg = train_config_from_json(meta.at("train"));
    TrainState st(*out.model, cfg);
    st.step = meta.at("step").get<std::size_t>();
    std::istringstream rng(meta.at("rng").get<std::string>());
    rng >> st.rng;
    if (!rng) throw CheckpointError("meta.json: bad RNG state");
    st.losses = meta.at("losses").get<std::vector<double>>();
    const auto& dv = meta.at("divergence");
    st.divergence.initial = dv.at("initial").get<double>();
    st.divergence.seen = dv.at("seen").get<std::size_t>();
    st.divergence.above = dv.at("above").get<std::size_t>();
    std::ifstream is(dir / "optimizer.bin", std::ios::binary);
    if (!is) throw CheckpointError("missing " + (dir / "optimizer.bin").string());
    st.optimizer.read(is);
    out.state.emplace(std::move(st));
  }
  return out;
}

void write_loss_log(std::ostream& os, const std::vector<double>& losses, std::size_t first) {
  os << "#format mosaic-losslog 1\n" << std::setprecision(17);
  for (std::size_t i = 0; i < losses.size(); ++i) os << "step " << first + i << ' ' << losses[i] << '\n';
}

void train(Model& model, TrainState& state, const std::vector<synth::ImageSample>& data,
           const std::optional<std::filesystem::path>& out_dir, const StepCallback& on_step) {
  const std::size_t chunk = state.cfg.checkpoint_every ? state.cfg.checkpoint_every : state.cfg.steps;
  auto save = [&] {
    if (!out_dir) return;
    save_checkpoint(*out_dir, model, &state);
    std::ofstream log(*out_dir / "loss.log");
    write_loss_log(log, state.losses);
  };
  while (state.step < state.cfg.steps) {
    train_steps(model, state, data, chunk, on_step);
    save();
  }
}

}  // namespace mosaic::pipeline
