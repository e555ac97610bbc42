#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/pipeline/model.hpp"
#include "mosaic/synthdata/scene.hpp"

namespace mosaic::pipeline {

enum class Phase { Backbone, Control };
const char* phase_name(Phase p);
Phase parse_phase(const std::string& s);

inline constexpr double kControlLr = 2e-5;
inline constexpr double kBackboneLr = 1e-3;

struct TrainConfig {
  Phase phase = Phase::Control;
  double lr = kControlLr;
  std::size_t batch = 4;
  std::size_t steps = 500;
  std::uint64_t seed = 0;
  bool condition_dropout = true;
  std::optional<FourierOptions> fourier;
  std::size_t checkpoint_every = 0;  // 0: only at the end

  // Throws std::invalid_argument on a non-positive lr, batch or step count.
  void validate() const;
};

struct PhaseError : std::logic_error {
  using std::logic_error::logic_error;
};

// Raised when the loss stays above 10x its first value for 100 steps in a row.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDivergenceWindow = 100;
inline constexpr double kDivergenceFactor = 10.0;

// Counts consecutive losses above kDivergenceFactor x the first one.
struct DivergenceMonitor {
  double initial = 0.0;
  std::size_t seen = 0;
  std::size_t above = 0;

  // True once `above` reaches kDivergenceWindow.
  bool update(double loss);
};

// Decoupled weight decay Adam over a list of stores; parameters are rounded
// to float after each update.
class AdamW {
 public:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8, kWeightDecay = 0.01;

  explicit AdamW(std::vector<ParameterStore*> stores);
  void step(double lr);
  std::size_t steps() const { return t_; }

  void write(std::ostream& os) const;
  void read(std::istream& is);

 private:
  std::vector<ParameterStore*> stores_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// Three of four conditions; Keypoint is never the dropped one when the scene
// has objects. Returned in canonical condition order.
std::vector<synth::ConditionKind> dropout_conditions(const synth::ImageSample& s, Rng& rng);

std::vector<pam::ConditionInput> condition_inputs(const synth::ImageSample& s,
                                                  const std::vector<synth::ConditionKind>& kinds);

// ||target - prediction||^2 over all pixels.
Tensor flow_loss(const Tensor& prediction, const Tensor& target);

// One training example: a sample, its timestep, the noise draw and the
// conditions that survived dropout.
struct TrainItem {
  const synth::ImageSample* sample = nullptr;
  double t = 0.0;
  Tensor noise;
  std::vector<synth::ConditionKind> conditions;
};

// Draws one item: index, then t in (0, 1], then the noise, then the dropout.
TrainItem draw_item(const std::vector<synth::ImageSample>& data, Rng& rng, bool dropout);

// Per-item loss for the phase (control: backbone plus injected control).
Tensor item_loss(const Model& model, Phase phase, const TrainItem& item,
                 const std::optional<FourierOptions>& fourier = std::nullopt);

// Batch mean of item_loss.
Tensor batch_loss(const Model& model, Phase phase, const std::vector<TrainItem>& items,
                  const std::optional<FourierOptions>& fourier = std::nullopt);

struct TrainState {
  TrainConfig cfg;
  std::size_t step = 0;
  Rng rng;
  AdamW optimizer;
  std::vector<double> losses;  // one per completed step
  DivergenceMonitor divergence;

  TrainState(Model& model, const TrainConfig& c);
};

// Checks the phase ordering, moves the model to the phase's stage and
// (for a control phase starting from a pretrained backbone) resets the
// control stack from the backbone.
TrainState begin_training(Model& model, const TrainConfig& cfg);

using StepCallback = std::function<void(std::size_t step, double loss)>;

// Runs up to `count` more steps (never beyond cfg.steps). Throws
// NonFiniteError on a NaN loss and DivergenceError on divergence.
void train_steps(Model& model, TrainState& state, const std::vector<synth::ImageSample>& data,
                 std::size_t count, const StepCallback& on_step = {});

// Checkpoint directory: params.bin (parameter container), optimizer.bin
// (moments as doubles) and meta.json (configs, stage, step, RNG, losses).
void save_checkpoint(const std::filesystem::path& dir, const Model& model,
                     const TrainState* state = nullptr);

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  std::optional<TrainState> state;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "#format mosaic-losslog 1" then "step <n> <loss>" lines.
void write_loss_log(std::ostream& os, const std::vector<double>& losses, std::size_t first = 1);

// Full run: begin (or continue) training, checkpoint every cfg.checkpoint_every
// steps into `out_dir` when given, and append to the loss log.
void train(Model& model, TrainState& state, const std::vector<synth::ImageSample>& data,
           const std::optional<std::filesystem::path>& out_dir = std::nullopt,
           const StepCallback& on_step = {});

}  // namespace mosaic::pipeline
