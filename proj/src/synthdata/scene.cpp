#include "mosaic/synthdata/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mosaic/numerics/rng.hpp"

namespace mosaic::synth {
namespace {

constexpr double kEdgeThreshold = 0.25;

// Plain modulo/bit tricks keep scenes identical across standard libraries.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n) { return rng() % n; }

double cross(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

bool covers(const SceneObject& o, double x, double y) {
  const double dx = x - o.cx, dy = y - o.cy;
  switch (o.kind) {
    case ShapeKind::Circle:
      return dx * dx + dy * dy <= o.size * o.size;
    case ShapeKind::Rectangle:
      return std::abs(dx) <= o.size && std::abs(dy) <= o.size2;
    case ShapeKind::Triangle: {
      const double ax = o.cx, ay = o.cy - o.size;
      const double bx = o.cx - o.size, by = o.cy + o.size;
      const double cx = o.cx + o.size, cy = o.cy + o.size;
      const double d1 = cross(ax, ay, bx, by, x, y);
      const double d2 = cross(bx, by, cx, cy, x, y);
      const double d3 = cross(cx, cy, ax, ay, x, y);
      const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
      const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
      return !(neg && pos);
    }
  }
  return false;
}

// Index of the topmost object covering the pixel centre, or -1.
int topmost(const SceneSpec& spec, std::size_t r, std::size_t c) {
  const double x = static_cast<double>(c) + 0.5, y = static_cast<double>(r) + 0.5;
  int best = -1;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    if (!covers(o, x, y)) continue;
    if (best < 0 || o.layer > spec.objects[static_cast<std::size_t>(best)].layer)
      best = static_cast<int>(i);
  }
  return best;
}

// Binary Sobel edge map with replicated borders.
std::vector<double> sobel_edges(const std::vector<double>& img, std::size_t n) {
  auto px = [&](long r, long c) {
    r = std::clamp(r, 0L, static_cast<long>(n) - 1);
    c = std::clamp(c, 0L, static_cast<long>(n) - 1);
    return img[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)];
  };
  std::vector<double> out(n * n, 0.0);
  for (long r = 0; r < static_cast<long>(n); ++r)
    for (long c = 0; c < static_cast<long>(n); ++c) {
      const double gx = (px(r - 1, c + 1) + 2 * px(r, c + 1) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2 * px(r, c - 1) + px(r + 1, c - 1));
      const double gy = (px(r + 1, c - 1) + 2 * px(r + 1, c) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2 * px(r - 1, c) + px(r - 1, c + 1));
      out[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)] =
          std::sqrt(gx * gx + gy * gy) > kEdgeThreshold ? 1.0 : 0.0;
    }
  return out;
}

void check_canvas(const Tensor& image) {
  if (image.shape() != Shape{kCanvas, kCanvas})
    throw ShapeError("expected a 32x32 image, got " + shape_str(image.shape()));
}

}  // namespace

const char* condition_name(ConditionKind k) {
  switch (k) {
    case ConditionKind::Edge: return "edge";
    case ConditionKind::Depth: return "depth";
    case ConditionKind::Sketch: return "sketch";
    case ConditionKind::Keypoint: return "keypoint";
  }
  return "?";
}

ConditionKind parse_condition(const std::string& name) {
  for (auto k : kAllConditions)
    if (name == condition_name(k)) return k;
  throw std::invalid_argument("unknown condition '" + name + "'");
}

std::array<std::uint8_t, 3> condition_color(ConditionKind k) {
  switch (k) {
    case ConditionKind::Edge: return {255, 0, 0};
    case ConditionKind::Depth: return {0, 255, 0};
    case ConditionKind::Sketch: return {255, 255, 0};
    case ConditionKind::Keypoint: return {0, 0, 255};
  }
  return {0, 0, 0};
}

void validate(const SceneSpec& spec) {
  std::vector<int> layers;
  const double lim = static_cast<double>(kCanvas);
  for (const auto& o : spec.objects) {
    const double hy = o.kind == ShapeKind::Rectangle ? o.size2 : o.size;
    if (o.size <= 0 || hy <= 0 || o.cx - o.size < 0 || o.cx + o.size > lim || o.cy - hy < 0 ||
        o.cy + hy > lim)
      throw std::invalid_argument("scene object leaves the canvas");
    if (o.gray_bucket < 0 || o.gray_bucket >= static_cast<int>(kGrayPalette.size()))
      throw std::invalid_argument("gray bucket out of range");
    layers.push_back(o.layer);
  }
  std::sort(layers.begin(), layers.end());
  if (std::adjacent_find(layers.begin(), layers.end()) != layers.end())
    throw std::invalid_argument("duplicate layer index");
}

SceneSpec generate_scene(std::uint64_t seed) {
  Rng rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  const std::size_t n = 1 + uniform_index(rng, 3);
  std::vector<int> layers(n);
  std::iota(layers.begin(), layers.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(layers[i - 1], layers[uniform_index(rng, i)]);
  for (std::size_t i = 0; i < n; ++i) {
    SceneObject o;
    o.kind = static_cast<ShapeKind>(uniform_index(rng, kNumShapeKinds));
    const auto s = static_cast<double>(4 + uniform_index(rng, 6));
    o.size = s;
    o.size2 = o.kind == ShapeKind::Rectangle ? static_cast<double>(3 + uniform_index(rng, static_cast<std::uint64_t>(s) - 2)) : s;
    const auto span_x = static_cast<std::uint64_t>(kCanvas - 2 * static_cast<std::size_t>(s)) + 1;
    const auto span_y = static_cast<std::uint64_t>(kCanvas - 2 * static_cast<std::size_t>(o.size2)) + 1;
    o.cx = s + static_cast<double>(uniform_index(rng, span_x));
    o.cy = o.size2 + static_cast<double>(uniform_index(rng, span_y));
    o.layer = layers[i];
    o.gray_bucket = static_cast<int>(uniform_index(rng, kGrayPalette.size()));
    spec.objects.push_back(o);
  }
  return spec;
}

Tensor render_scene(const SceneSpec& spec) {
  validate(spec);
  Tensor img = Tensor::zeros({kCanvas, kCanvas});
  auto d = img.mutable_data();
  for (std::size_t r = 0; r < kCanvas; ++r)
    for (std::size_t c = 0; c < kCanvas; ++c) {
      const int i = topmost(spec, r, c);
      if (i >= 0) d[r * kCanvas + c] = spec.objects[static_cast<std::size_t>(i)].gray();
    }
  return img;
}

Tensor derive_edge(const Tensor& image) {
  check_canvas(image);
  return Tensor({kCanvas, kCanvas}, sobel_edges(image.to_vector(), kCanvas));
}

Tensor derive_depth(const SceneSpec& spec) {
  Tensor out = Tensor::zeros({kCanvas, kCanvas});
  auto d = out.mutable_data();
  const double n = static_cast<double>(spec.objects.size());
  for (std::size_t r = 0; r < kCanvas; ++r)
    for (std::size_t c = 0; c < kCanvas; ++c) {
      const int i = topmost(spec, r, c);
      if (i >= 0) d[r * kCanvas + c] = (spec.objects[static_cast<std::size_t>(i)].layer + 1) / n;
    }
  return out;
}

Tensor derive_sketch(const Tensor& image) {
  check_canvas(image);
  const std::size_t n = kCanvas, h = n / 2;
  const auto src = image.data();
  auto px = [&](long r, long c) {
    r = std::clamp(r, 0L, static_cast<long>(n) - 1);
    c = std::clamp(c, 0L, static_cast<long>(n) - 1);
    return src[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)];
  };
  std::vector<double> blur(n * n);
  for (long r = 0; r < static_cast<long>(n); ++r)
    for (long c = 0; c < static_cast<long>(n); ++c) {
      double s = 0.0;
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc) s += px(r + dr, c + dc);
      blur[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)] = s / 9.0;
    }
  std::vector<double> small(h * h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < h; ++c)
      small[r * h + c] = 0.25 * (blur[2 * r * n + 2 * c] + blur[2 * r * n + 2 * c + 1] +
                                 blur[(2 * r + 1) * n + 2 * c] + blur[(2 * r + 1) * n + 2 * c + 1]);
  const auto edges = sobel_edges(small, h);
  Tensor out = Tensor::zeros({n, n});
  auto d = out.mutable_data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) d[r * n + c] = edges[(r / 2) * h + c / 2];
  return out;
}

std::vector<std::array<double, 2>> keypoint_anchors(const SceneObject& o) {
  switch (o.kind) {
    case ShapeKind::Circle:
      return {{o.cx, o.cy}, {o.cx + o.size, o.cy}, {o.cx - o.size, o.cy},
              {o.cx, o.cy + o.size}, {o.cx, o.cy - o.size}};
    case ShapeKind::Rectangle:
      return {{o.cx, o.cy}, {o.cx - o.size, o.cy - o.size2}, {o.cx + o.size, o.cy - o.size2},
              {o.cx - o.size, o.cy + o.size2}, {o.cx + o.size, o.cy + o.size2}};
    case ShapeKind::Triangle:
      return {{o.cx, o.cy + o.size / 3.0}, {o.cx, o.cy - o.size},
              {o.cx - o.size, o.cy + o.size}, {o.cx + o.size, o.cy + o.size}};
  }
  return {};
}

std::array<std::size_t, 2> point_to_pixel(double x, double y) {
  const double hi = static_cast<double>(kCanvas - 1);
  return {static_cast<std::size_t>(std::clamp(std::floor(y), 0.0, hi)),
          static_cast<std::size_t>(std::clamp(std::floor(x), 0.0, hi))};
}

Tensor derive_keypoints(const SceneSpec& spec) {
  Tensor out = Tensor::zeros({kCanvas, kCanvas});
  auto d = out.mutable_data();
  for (const auto& o : spec.objects)
    for (const auto& [x, y] : keypoint_anchors(o)) {
      const auto [r, c] = point_to_pixel(x, y);
      d[r * kCanvas + c] = 1.0;
    }
  return out;
}

std::array<int, kTextTokens> text_tokens(const SceneSpec& spec) {
  if (spec.objects.size() > kTextTokens - 1) throw std::invalid_argument("too many objects for text");
  std::array<int, kTextTokens> ids;
  ids.fill(kPadToken);
  ids[0] = static_cast<int>(spec.objects.size());
  std::vector<const SceneObject*> by_layer;
  for (const auto& o : spec.objects) by_layer.push_back(&o);
  std::sort(by_layer.begin(), by_layer.end(),
            [](const SceneObject* a, const SceneObject* b) { return a->layer < b->layer; });
  for (std::size_t i = 0; i < by_layer.size(); ++i)
    ids[i + 1] = 4 + static_cast<int>(by_layer[i]->kind) * 4 + by_layer[i]->gray_bucket;
  return ids;
}

ImageSample make_sample(const SceneSpec& spec) {
  ImageSample s;
  s.spec = spec;
  s.image = render_scene(spec);
  s.conditions[0] = derive_edge(s.image);
  s.conditions[1] = derive_depth(spec);
  s.conditions[2] = derive_sketch(s.image);
  s.conditions[3] = derive_keypoints(spec);
  s.text = text_tokens(spec);
  return s;
}

std::vector<ImageSample> make_dataset(std::uint64_t seed, std::size_t count) {
  if (count == 0) throw std::invalid_argument("dataset count must be at least 1");
  std::vector<ImageSample> out(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        make_sample(generate_scene(derive_seed(seed, static_cast<std::uint64_t>(i))));
  return out;
}

}  // namespace mosaic::synth
