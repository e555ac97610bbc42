#include "mosaic/pipeline/sample.hpp"

#include <algorithm>

#include "mosaic/numerics/tape.hpp"

namespace mosaic::pipeline {

Tensor initial_noise(std::uint64_t seed, std::size_t canvas) {
  Rng rng(derive_seed(seed, 0x6e6f697365ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(canvas * canvas);
  for (auto& x : v) x = normal(rng);
  return Tensor({canvas, canvas}, std::move(v));
}

Tensor clamp01(const Tensor& x) {
  std::vector<double> v = x.to_vector();
  for (auto& e : v) e = std::clamp(e, 0.0, 1.0);
  return Tensor(x.shape(), std::move(v));
}

SampleResult sample(const Model& model, const SampleRequest& req) {
  if (req.steps < 1) throw std::invalid_argument("sample: steps must be >= 1");
  if (req.mode != SampleMode::BackboneOnly && req.conditions.empty())
    throw std::invalid_argument("sample: no conditions given");
  NoGradGuard guard;
  const std::size_t canvas = model.config().backbone().canvas;
  const double n = static_cast<double>(req.steps);
  Rng select_rng(derive_seed(req.seed, 0x72616e646f6dULL));

  SampleResult out;
  const Tensor y = model.text(req.text);
  std::vector<double> z = initial_noise(req.seed, canvas).to_vector();
  for (std::size_t i = 0; i < req.steps; ++i) {
    const double t = static_cast<double>(req.steps - i) / n;
    const Tensor z_t({canvas, canvas}, z);
    Tensor v;
    if (req.mode == SampleMode::BackboneOnly) {
      v = model.backbone_velocity(z_t, t, y);
    } else {
      ForwardOptions opts;
      opts.fourier = req.fourier;
      if (req.mode == SampleMode::Random) {
        opts.selection = Selection::Random;
        opts.random_rng = &select_rng;
      }
      auto r = model.controlled_velocity(z_t, t, y, req.conditions, opts);
      v = r.velocity;
      out.traces.push_back(std::move(r.trace));
    }
    const auto dv = v.data();
    for (std::size_t k = 0; k < z.size(); ++k) z[k] -= dv[k] / n;
  }
  out.image = clamp01(Tensor({canvas, canvas}, std::move(z)));
  return out;
}

}  // namespace mosaic::pipeline
