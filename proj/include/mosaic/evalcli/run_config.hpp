#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/evalcli/report.hpp"

namespace mosaic::evalcli {

inline constexpr const char* kOutDirEnv = "MOSAIC_OUT_DIR";

// Every parameter a subcommand can take. JSON layout:
//   { "out_dir": str,
//     "data":   { "seed": u64, "count": u64, "dir": str },
//     "model":  { ModelConfig keys },
//     "train":  { TrainConfig keys },
//     "checkpoint": str, "backbone": str, "resume": str,
//     "sample": { "count": u64, "first": u64, "seed": u64, "steps": u64,
//                 "conditions": [str], "subsets": [str], "mode": str,
//                 "trace": bool, "fourier": {...} | null },
//     "trace_file": str }
// Unknown keys at any level are rejected.
struct RunConfig {
  std::filesystem::path out_dir;

  std::uint64_t data_seed = 1;
  std::size_t data_count = 256;
  std::filesystem::path data_dir;

  pipeline::ModelConfig model;
  pipeline::TrainConfig train;

  std::filesystem::path checkpoint;
  std::filesystem::path backbone;
  std::filesystem::path resume;

  std::size_t sample_count = 4;
  std::size_t sample_first = 0;
  std::uint64_t sample_seed = 0;
  std::size_t sample_steps = pipeline::kSampleSteps;
  std::vector<ConditionKind> conditions{synth::kAllConditions.begin(), synth::kAllConditions.end()};
  std::vector<std::vector<ConditionKind>> subsets;
  pipeline::SampleMode mode = pipeline::SampleMode::Adaptive;
  bool trace = false;
  std::optional<pipeline::FourierOptions> fourier;

  std::filesystem::path trace_file;

  // $MOSAIC_OUT_DIR when set, else "mosaic_out".
  static std::filesystem::path default_out_dir();
};

// Overlays the keys present in `j` on `base`. Throws pipeline::ConfigError.
RunConfig run_config_from_json(const pipeline::Json& j, RunConfig base = {});
pipeline::Json to_json(const RunConfig& c);

}  // namespace mosaic::evalcli
