#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/numerics/rng.hpp"
#include "mosaic/pam/isb.hpp"
#include "mosaic/synthdata/scene.hpp"

namespace mosaic::pam {

using synth::ConditionKind;
using synth::kNumConditions;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PamConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ff_mult = 4;
  std::size_t patch = 2;
  std::size_t canvas = synth::kCanvas;
  std::size_t n_p = 0;  // 0: one grid row per step (canvas / patch)
  double mod_init = 0.02;
  double score_init = 0.02;

  std::size_t grid() const { return canvas / patch; }
  std::size_t m() const { return grid() * grid(); }
  std::size_t picks_per_step() const { return n_p ? n_p : grid(); }
  std::size_t iterations() const { return m() / picks_per_step(); }
  // Throws ConfigError when the patch grid or step size do not fit.
  void validate() const;
};

struct ConditionInput {
  ConditionKind kind;
  Tensor map;
};

struct Pick {
  std::size_t iteration = 0;
  std::size_t position = 0;
  int condition = 0;  // ConditionKind id
  double score = 0.0;
};

struct SelectionTrace {
  std::size_t m = 0;
  std::size_t n_p = 0;
  std::vector<Pick> picks;
  std::vector<int> assignment;  // position -> ConditionKind id, -1 while unfilled
  // Optional n x m score maps per iteration, dead entries -inf.
  std::vector<std::vector<double>> probabilities;
};

// Throws std::logic_error unless the trace is a complete partition built in
// m / n_p iterations of n_p picks each.
void validate_trace(const SelectionTrace& trace);

// Greedy exclusive Top-r over a flattened n x m score map (entry k*m + pos).
// Walks the value-descending / index-ascending order and claims a position the
// first time it is reached until n_p positions are claimed. Entries at -inf are
// dead. Returns (position, condition index) pairs in claim order.
std::vector<std::pair<std::size_t, std::size_t>> greedy_select(std::span<const double> m_prob,
                                                               std::size_t n, std::size_t m,
                                                               std::size_t n_p);

struct AdaptOptions {
  // Re-use the picks and score anchors of an earlier call. Selection is then a
  // constant of the forward pass too, which makes the straight-through
  // gradient visible to finite differences.
  const SelectionTrace* replay = nullptr;
  bool keep_probabilities = false;
};

struct AdaptResult {
  Tensor sp;
  SelectionTrace trace;
  std::vector<Tensor> encoded;
};

class PatchAdapter {
 public:
  // Registers encoder, positional and ISB parameters in `store`.
  PatchAdapter(ParameterStore& store, const PamConfig& cfg);

  const PamConfig& config() const { return cfg_; }

  // Patchify, per-condition affine embedding, shared positional embedding.
  Tensor encode(const Tensor& map, ConditionKind k) const;

  struct Scores {
    std::vector<Tensor> w_c;     // per condition, m x 1
    Tensor w_sp;                 // m x 1
    std::vector<double> m_prob;  // n x m, dead entries -inf
  };
  // live[pos] is 1 for positions not yet claimed.
  Scores score_conditions(const std::vector<Tensor>& c, const std::vector<ConditionKind>& kinds,
                          const Tensor& sp, const Tensor& y, const Tensor& o_t,
                          std::span<const double> live) const;

  // The autoregressive selection loop. y: M x d text tokens, o_t: 1 x d.
  AdaptResult adapt(const std::vector<ConditionInput>& conditions, const Tensor& y,
                    const Tensor& o_t, const AdaptOptions& options = {}) const;

  // Ablation comparator: every position takes a uniformly random condition.
  AdaptResult random_select(const std::vector<ConditionInput>& conditions, Rng& rng) const;

 private:
  std::vector<Tensor> encode_all(const std::vector<ConditionInput>& conditions) const;

  PamConfig cfg_;
  std::array<nn::Linear, kNumConditions> encoders_;
  Tensor pos_;
  std::array<Isb, kNumConditions> isb_c_;
  Isb isb_sp_;
};

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // RGB, row-major
};

// Paints each patch cell with its condition's colour; cell_px pixels per cell.
RgbImage trace_to_colormap(const SelectionTrace& trace, std::size_t cell_px = 1);
void write_ppm(std::ostream& os, const RgbImage& img);

// Per-(timestep, condition) selection counts.
class SelectionTally {
 public:
  explicit SelectionTally(std::size_t timesteps) : counts_(timesteps) {}
  void add(std::size_t timestep, const SelectionTrace& trace);
  std::size_t timesteps() const { return counts_.size(); }
  const std::array<std::uint64_t, kNumConditions>& counts(std::size_t t) const { return counts_[t]; }
  // Rows sum to 1 (rows without data are all zero).
  std::vector<std::array<double, kNumConditions>> fractions() const;

 private:
  std::vector<std::array<std::uint64_t, kNumConditions>> counts_;
};

std::vector<std::array<double, kNumConditions>> selection_histogram(
    const std::vector<std::vector<SelectionTrace>>& traces_by_timestep);

// "#format mosaic-trace 1" followed by one record per pick:
//   pick <timestep> <iteration> <position> <condition_id> <score>
void write_trace_header(std::ostream& os);
void write_trace_records(std::ostream& os, std::size_t timestep, const SelectionTrace& trace);

}  // namespace mosaic::pam
