#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mosaic/numerics/tensor.hpp"

namespace mosaic::synth {

inline constexpr std::size_t kCanvas = 32;

enum class ConditionKind : int { Edge = 0, Depth = 1, Sketch = 2, Keypoint = 3 };
inline constexpr std::size_t kNumConditions = 4;
inline constexpr std::array<ConditionKind, kNumConditions> kAllConditions = {
    ConditionKind::Edge, ConditionKind::Depth, ConditionKind::Sketch, ConditionKind::Keypoint};

const char* condition_name(ConditionKind k);
// Accepts "edge", "depth", "sketch", "keypoint" (case-sensitive).
ConditionKind parse_condition(const std::string& name);
// Trace colour: red, green, yellow, blue.
std::array<std::uint8_t, 3> condition_color(ConditionKind k);

enum class ShapeKind : int { Circle = 0, Rectangle = 1, Triangle = 2 };
inline constexpr std::size_t kNumShapeKinds = 3;
inline constexpr std::array<double, 4> kGrayPalette = {0.35, 0.55, 0.75, 0.95};

// Geometry is in continuous canvas coordinates; pixel (r, c) is sampled at
// its centre (c + 0.5, r + 0.5).
struct SceneObject {
  ShapeKind kind = ShapeKind::Circle;
  double cx = 0.0;
  double cy = 0.0;
  double size = 0.0;    // radius / half-width / half-base
  double size2 = 0.0;   // rectangle half-height, otherwise equal to size
  int layer = 0;
  int gray_bucket = 0;  // index into kGrayPalette

  double gray() const { return kGrayPalette.at(static_cast<std::size_t>(gray_bucket)); }
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;
};

// Throws std::invalid_argument if an object leaves the canvas or layers repeat.
void validate(const SceneSpec& spec);

SceneSpec generate_scene(std::uint64_t seed);

Tensor render_scene(const SceneSpec& spec);
Tensor derive_edge(const Tensor& image);
Tensor derive_depth(const SceneSpec& spec);
Tensor derive_sketch(const Tensor& image);
Tensor derive_keypoints(const SceneSpec& spec);

// Continuous anchor points (centroid first) that derive_keypoints marks.
std::vector<std::array<double, 2>> keypoint_anchors(const SceneObject& obj);
// Pixel hit by a continuous point, clamped to the canvas.
std::array<std::size_t, 2> point_to_pixel(double x, double y);

// Text token ids: [object count, then one (kind, gray) token per object in
// layer order, padded]. Ids: count tokens 0..3, object tokens 4..15, pad 16.
inline constexpr std::size_t kTextTokens = 4;
inline constexpr std::size_t kTextVocab = 17;
inline constexpr int kPadToken = 16;
std::array<int, kTextTokens> text_tokens(const SceneSpec& spec);

struct ImageSample {
  SceneSpec spec;
  Tensor image;
  std::array<Tensor, kNumConditions> conditions;
  std::array<int, kTextTokens> text;

  const Tensor& condition(ConditionKind k) const {
    return conditions[static_cast<std::size_t>(k)];
  }
};

ImageSample make_sample(const SceneSpec& spec);
// Sample i uses scene seed derive_seed(seed, i).
std::vector<ImageSample> make_dataset(std::uint64_t seed, std::size_t count);

}  // namespace mosaic::synth
