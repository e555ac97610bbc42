#include "mosaic/evalcli/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>

#include "mosaic/evalcli/ssim.hpp"
#include "mosaic/numerics/tape.hpp"
#include "mosaic/numerics/top_r.hpp"
#include "mosaic/pipeline/sample.hpp"
#include "mosaic/pipeline/train.hpp"

namespace mosaic::evalcli {
namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

pipeline::ModelConfig tiny() {
  pipeline::ModelConfig c;
  c.d = 8;
  c.heads = 1;
  c.ff_mult = 2;
  c.double_blocks = 1;
  c.single_blocks = 1;
  c.init_seed = 17;
  return c;
}

Tensor noise_image(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(32 * 32);
  for (auto& x : v) x = u(rng);
  return Tensor({32, 32}, std::move(v));
}

void check_top_r() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> val(0, 5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(20);
    for (auto& x : v) x = val(rng);
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
    idx.resize(7);
    expect(top_r(v, 7) == idx, "top_r disagrees with the sort oracle");
  }
}

void check_partition() {
  ParameterStore store;
  pam::PamConfig cfg = tiny().pam();
  pam::PatchAdapter pa(store, cfg);
  auto s = synth::make_sample(synth::generate_scene(5));
  NoGradGuard g;
  for (int trial = 0; trial < 3; ++trial) {
    store.initialize(static_cast<std::uint64_t>(trial) + 10);
    std::vector<pam::ConditionInput> c;
    for (auto k : synth::kAllConditions) c.push_back({k, s.condition(k)});
    const auto r = pa.adapt(c, Tensor::full({4, cfg.d}, 0.1), Tensor::full({1, cfg.d}, 0.2));
    pam::validate_trace(r.trace);
    expect(r.trace.picks.size() == cfg.m(), "trace does not cover every position");
  }
}

void check_degeneracy() {
  ParameterStore store;
  pam::PatchAdapter pa(store, tiny().pam());
  store.initialize(3);
  auto s = synth::make_sample(synth::generate_scene(6));
  NoGradGuard g;
  for (auto k : synth::kAllConditions) {
    const auto r = pa.adapt({{k, s.condition(k)}}, Tensor::full({4, 8}, 0.1), Tensor::full({1, 8}, 0.2));
    expect(bit_equal(r.sp, pa.encode(s.condition(k), k)), "SP_out differs from the encoder output");
  }
}

void check_flow() {
  std::mt19937_64 rng(4);
  const Tensor x0 = noise_image(rng), n = noise_image(rng);
  expect(bit_equal(backbone::interpolate(x0, n, 0.0), x0), "z_0 != x0");
  expect(bit_equal(backbone::interpolate(x0, n, 1.0), n), "z_1 != noise");
  const Tensor v = backbone::target_velocity(x0, n);
  expect(pipeline::flow_loss(v, v).item() == 0.0, "perfect predictor loss is not 0");
}

void check_fourier() {
  std::mt19937_64 rng(5);
  const Tensor x = noise_image(rng);
  expect(pipeline::high_band_scale(0.7) == 1.5 && pipeline::high_band_scale(2.0 / 3.0) == 1.5,
         "high band scale is not 3/2");
  pipeline::FourierOptions full;
  full.cutoff = 1e3;
  expect(max_abs_diff(pipeline::fourier_filter(x, 1.0, full), x) < 1e-9, "round trip failed");
  const auto f = fft2(x);
  const auto b = pipeline::split_bands(f, 4.0);
  double el = 0, eh = 0, ef = 0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    el += std::norm(b.low.values[i]);
    eh += std::norm(b.high.values[i]);
    ef += std::norm(f.values[i]);
  }
  expect(std::abs(el + eh - ef) <= 1e-9 * ef, "band energies do not add up");
}

void check_ssim() {
  std::mt19937_64 rng(6);
  const Tensor a = noise_image(rng), b = noise_image(rng);
  expect(ssim(a, a) == 1.0, "ssim(x, x) != 1");
  expect(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12, "ssim is not symmetric");
  const double s = ssim(a, b);
  expect(s >= -1.0 && s <= 1.0, "ssim out of range");
}

void check_zero_init() {
  pipeline::Model model(tiny());
  auto data = synth::make_dataset(7, 4);
  pipeline::TrainConfig c;
  c.phase = pipeline::Phase::Backbone;
  c.lr = 1e-3;
  c.batch = 1;
  c.steps = 2;
  auto st = pipeline::begin_training(model, c);
  pipeline::train_steps(model, st, data, 2);
  model.reset_control();
  for (std::size_t i = 0; i < 2; ++i) {
    pipeline::SampleRequest req;
    req.text = data[i].text;
    for (auto k : synth::kAllConditions) req.conditions.push_back({k, data[i].condition(k)});
    req.steps = 3;
    req.seed = i;
    const auto with = pipeline::sample(model, req);
    req.mode = pipeline::SampleMode::BackboneOnly;
    expect(bit_equal(with.image, pipeline::sample(model, req).image),
           "fresh control stack changed the sample");
  }
}

void check_checkpoint() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("mosaic_selftest_" + std::to_string(std::random_device{}()));
  pipeline::Model model(tiny());
  pipeline::save_checkpoint(dir, model);
  auto back = pipeline::load_checkpoint(dir);
  std::filesystem::remove_all(dir);
  for (std::size_t i = 0; i < model.backbone_store().entries().size(); ++i)
    expect(bit_equal(model.backbone_store().entries()[i].tensor,
                     back.model->backbone_store().entries()[i].tensor),
           "parameters changed across save/load");
}

}  // namespace

SelftestSummary run_selftest(std::ostream& log) {
  const std::vector<std::pair<const char*, std::function<void()>>> checks = {
      {"top_r_oracle", check_top_r},
      {"selection_partition", check_partition},
      {"single_condition_degeneracy", check_degeneracy},
      {"flow_endpoints_and_zero_loss", check_flow},
      {"fourier_algebra", check_fourier},
      {"ssim_identities", check_ssim},
      {"zero_init_equivalence", check_zero_init},
      {"checkpoint_round_trip", check_checkpoint},
  };
  SelftestSummary s;
  for (const auto& [name, fn] : checks) {
    try {
      fn();
      log << "PASS " << name << '\n';
      ++s.passed;
    } catch (const std::exception& e) {
      log << "FAIL " << name << ": " << e.what() << '\n';
      ++s.failed;
    }
  }
  log << "selftest: " << s.passed << " passed, " << s.failed << " failed\n";
  return s;
}

}  // namespace mosaic::evalcli
