#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "mosaic/pipeline/config_json.hpp"
#include "mosaic/pipeline/sample.hpp"

namespace mosaic::evalcli {

using synth::ConditionKind;
using synth::kNumConditions;

// "keypoint", "edge+keypoint", ... in canonical condition order.
std::string subset_label(const std::vector<ConditionKind>& subset);
// Parses a comma- or plus-separated list; rejects empty lists and repeats.
std::vector<ConditionKind> parse_subset(const std::string& text);
// Canonical order, no repeats.
std::vector<ConditionKind> canonical_subset(std::vector<ConditionKind> subset);

const char* mode_name(pipeline::SampleMode m);
pipeline::SampleMode parse_mode(const std::string& s);

struct EvalOptions {
  std::vector<ConditionKind> subset;
  std::uint64_t seed = 0;
  std::size_t steps = pipeline::kSampleSteps;
  pipeline::SampleMode mode = pipeline::SampleMode::Adaptive;
  std::optional<pipeline::FourierOptions> fourier;
};

struct ItemScore {
  std::size_t index = 0;
  std::uint64_t scene_seed = 0;
  double ssim = 0.0;
};

struct EvalReport {
  std::string label;
  pipeline::SampleMode mode = pipeline::SampleMode::Adaptive;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  pipeline::Json config;  // echo of the model and evaluation settings
  std::vector<ItemScore> items;
  double ssim_mean = 0.0;
  double ssim_median = 0.0;
  // steps x 4 selection fractions (rows sum to 1); zero rows for the backbone-only mode.
  std::vector<std::array<double, kNumConditions>> fractions;
  // Raw counts behind `fractions`.
  std::vector<std::array<std::uint64_t, kNumConditions>> counts;
};

// Per-item sampling seed used by eval_run.
std::uint64_t item_seed(std::uint64_t seed, std::size_t index);

// Samples one image per item with the item's text and its conditions
// restricted to the subset, scores SSIM against the item's render and
// tallies the selection traces per step. Items run concurrently; results are
// folded in item order. Throws std::invalid_argument for an empty subset.
EvalReport eval_run(const pipeline::Model& model, const std::vector<synth::ImageSample>& items,
                    const EvalOptions& opts);

// "#format mosaic-report 1" followed by one record per line:
//   label/mode/seed/steps/items/config/ssim_mean/ssim_median headers, then
//   item <index> <scene_seed> <ssim>, fraction <step> <e> <d> <s> <k> and
//   count <step> <e> <d> <s> <k>.
void write_report(std::ostream& os, const EvalReport& r);

// One human-readable table row per report.
void write_summary(std::ostream& os, const std::vector<EvalReport>& reports);

}  // namespace mosaic::evalcli
