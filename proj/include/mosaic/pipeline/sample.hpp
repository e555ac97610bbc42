#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mosaic/pipeline/model.hpp"

namespace mosaic::pipeline {

inline constexpr std::size_t kSampleSteps = 25;

enum class SampleMode {
  BackboneOnly,  // no PAM, no control
  Adaptive,      // PAM selection every step
  Random,        // random_selection_baseline every step
};

struct SampleRequest {
  std::array<int, synth::kTextTokens> text{};
  std::vector<pam::ConditionInput> conditions;
  std::size_t steps = kSampleSteps;
  std::uint64_t seed = 0;
  SampleMode mode = SampleMode::Adaptive;
  std::optional<FourierOptions> fourier;
};

struct SampleResult {
  Tensor image;  // clamped to [0, 1]
  // One per step in order t = 1, 1 - 1/steps, ...; empty for BackboneOnly.
  std::vector<pam::SelectionTrace> traces;
};

// Euler integration of the flow from z_1 ~ N(0, I) (drawn from `seed`) on
// the uniform grid t_i = (steps - i) / steps. The random baseline draws its
// assignments from a separate stream of the same seed. Throws
// std::invalid_argument for steps < 1 and for a missing condition list.
SampleResult sample(const Model& model, const SampleRequest& req);

// The starting noise sample() uses for `seed`.
Tensor initial_noise(std::uint64_t seed, std::size_t canvas);

Tensor clamp01(const Tensor& x);

}  // namespace mosaic::pipeline
