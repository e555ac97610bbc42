#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mosaic/numerics/grad_check.hpp"
#include "mosaic/numerics/tape.hpp"
#include "mosaic/pipeline/config_json.hpp"
#include "mosaic/pipeline/sample.hpp"
#include "mosaic/pipeline/train.hpp"
#include "test_util.hpp"

using namespace mosaic;
using namespace mosaic::pipeline;
using mosaic::testing::random_tensor;

namespace {

ModelConfig tiny_model(std::uint64_t seed = 3) {
  ModelConfig c;
  c.d = 8;
  c.heads = 1;
  c.ff_mult = 2;
  c.double_blocks = 1;
  c.single_blocks = 1;
  c.init_seed = seed;
  return c;
}

const std::vector<synth::ImageSample>& data() {
  static const auto d = synth::make_dataset(11, 16);
  return d;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mosaic_test_pipeline_" + name);
  std::filesystem::remove_all(p);
  return p;
}

void pretrain(Model& model, std::size_t steps = 3) {
  TrainConfig c;
  c.phase = Phase::Backbone;
  c.lr = 1e-3;
  c.batch = 2;
  c.steps = steps;
  auto st = begin_training(model, c);
  train_steps(model, st, data(), steps);
}

bool stores_equal(const ParameterStore& a, const ParameterStore& b) {
  if (a.entries().size() != b.entries().size()) return false;
  for (std::size_t i = 0; i < a.entries().size(); ++i)
    if (!bit_equal(a.entries()[i].tensor, b.entries()[i].tensor)) return false;
  return true;
}

std::vector<pam::ConditionInput> all_conditions(const synth::ImageSample& s) {
  return condition_inputs(s, {synth::kAllConditions.begin(), synth::kAllConditions.end()});
}

}  // namespace

TEST_CASE("flow loss is zero exactly for a perfect prediction and positive otherwise") {
  std::mt19937_64 rng(1);
  const Tensor a = random_tensor({32, 32}, rng);
  CHECK(flow_loss(a, a).item() == 0.0);
  const Tensor b = random_tensor({32, 32}, rng);
  CHECK(flow_loss(a, b).item() > 0.0);
  // For a constant offset c the loss is numel * c^2.
  CHECK(flow_loss(ops::add_scalar(a, 0.5), a).item() == doctest::Approx(1024 * 0.25).epsilon(1e-12));
}

TEST_CASE("zero predictor loss matches its closed form") {
  // A fresh backbone predicts exactly zero, so the backbone-phase loss is
  // ||N - x0||^2 whose expectation is ||x0||^2 + numel.
  Model model(tiny_model());
  const auto& d = data();
  double expect = 0.0;
  for (const auto& s : d) expect += ops::sum_squares(s.image).item() + 1024.0;
  expect /= static_cast<double>(d.size());

  Rng rng(9);
  NoGradGuard guard;
  const std::size_t draws = 3000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto item = draw_item(d, rng, false);
    const double l = item_loss(model, Phase::Backbone, item).item();
    sum += l;
    sq += l * l;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sq / draws - mean * mean);
  CHECK(std::abs(mean - expect) < 4.0 * sd / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("training item draws are reproducible and t stays in (0, 1]") {
  Rng a(4), b(4);
  for (int i = 0; i < 200; ++i) {
    const auto x = draw_item(data(), a, true), y = draw_item(data(), b, true);
    CHECK(x.sample == y.sample);
    CHECK(x.t == y.t);
    CHECK(x.t > 0.0);
    CHECK(x.t <= 1.0);
    CHECK(bit_equal(x.noise, y.noise));
    CHECK(x.conditions == y.conditions);
  }
}

TEST_CASE("condition dropout keeps keypoint and drops each other condition a third of the time") {
  const auto& s = data()[0];
  REQUIRE(!s.spec.objects.empty());
  Rng rng(21);
  const std::size_t trials = 10000;
  std::array<std::size_t, 4> dropped{};
  for (std::size_t i = 0; i < trials; ++i) {
    const auto kept = dropout_conditions(s, rng);
    REQUIRE(kept.size() == 3);
    for (std::size_t k = 0; k < 4; ++k)
      if (std::find(kept.begin(), kept.end(), synth::kAllConditions[k]) == kept.end()) ++dropped[k];
  }
  CHECK(dropped[static_cast<std::size_t>(synth::ConditionKind::Keypoint)] == 0);
  const double p = 1.0 / 3.0, sigma = std::sqrt(p * (1 - p) / trials);
  for (auto k : {synth::ConditionKind::Edge, synth::ConditionKind::Depth, synth::ConditionKind::Sketch})
    CHECK(std::abs(dropped[static_cast<std::size_t>(k)] / double(trials) - p) < 4 * sigma);

  synth::ImageSample empty = s;
  empty.spec.objects.clear();
  std::array<std::size_t, 4> dropped_empty{};
  for (std::size_t i = 0; i < 4000; ++i) {
    const auto kept = dropout_conditions(empty, rng);
    REQUIRE(kept.size() == 3);
    for (std::size_t k = 0; k < 4; ++k)
      if (std::find(kept.begin(), kept.end(), synth::kAllConditions[k]) == kept.end()) ++dropped_empty[k];
  }
  CHECK(dropped_empty[3] > 0);
}

TEST_CASE("train config validation and phase ordering") {
  TrainConfig c;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.lr = 1e-3;
  c.batch = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  Model model(tiny_model());
  TrainConfig ctl;
  ctl.phase = Phase::Control;
  CHECK_THROWS_AS(begin_training(model, ctl), PhaseError);
  pretrain(model, 1);
  CHECK(model.stage() == Stage::Backbone);
  auto st = begin_training(model, ctl);
  CHECK(model.stage() == Stage::Control);
  TrainConfig bb;
  bb.phase = Phase::Backbone;
  CHECK_THROWS_AS(begin_training(model, bb), PhaseError);
}

TEST_CASE("starting the control phase copies the backbone into the control blocks") {
  Model model(tiny_model());
  pretrain(model);
  TrainConfig ctl;
  ctl.phase = Phase::Control;
  begin_training(model, ctl);
  const auto& zero = model.control().zero_projections();
  for (const auto& e : model.control_store().entries()) {
    const bool is_zero = std::find(zero.begin(), zero.end(), e.name) != zero.end();
    if (is_zero) {
      for (double v : e.tensor.data()) CHECK(v == 0.0);
    } else if (model.backbone_store().contains(e.name)) {
      CHECK(bit_equal(e.tensor, model.backbone_store().get(e.name)));
    }
  }
}

TEST_CASE("control phase leaves the backbone bit-identical and moves PAM and control") {
  Model model(tiny_model());
  pretrain(model);
  ParameterStore before;
  for (const auto& e : model.backbone_store().entries()) before.add(e.name, e.tensor.shape(), e.init);
  before.copy_matching(model.backbone_store());
  TrainConfig ctl;
  ctl.phase = Phase::Control;
  ctl.lr = 1e-3;
  ctl.batch = 2;
  ctl.steps = 3;
  auto st = begin_training(model, ctl);
  const Tensor proj_before = model.control_store().get(model.control().zero_projections()[0]).clone();

  // Gradients reach only the trainable stores.
  auto item = draw_item(data(), st.rng, false);
  model.pam_store().set_requires_grad(true);
  model.control_store().set_requires_grad(true);
  model.backbone_store().set_requires_grad(false);
  backward(item_loss(model, Phase::Control, item));
  for (const auto& e : model.backbone_store().entries()) {
    for (double g : e.tensor.grad()) CHECK(g == 0.0);
  }
  bool control_grad = false;
  for (const auto& e : model.control_store().entries())
    for (double g : e.tensor.grad()) control_grad |= g != 0.0;
  CHECK(control_grad);
  model.pam_store().zero_grad();
  model.control_store().zero_grad();

  train_steps(model, st, data(), 3);
  CHECK(stores_equal(before, model.backbone_store()));
  CHECK(!bit_equal(proj_before, model.control_store().get(model.control().zero_projections()[0])));
  CHECK(st.optimizer.steps() == 3);
}

TEST_CASE("AdamW first step moves every parameter by lr against the gradient sign") {
  ParameterStore store;
  Tensor w = store.add("w", {4}, InitSpec::zero());
  auto data_w = w.mutable_data();
  data_w[0] = 1.0;
  data_w[1] = -1.0;
  data_w[2] = 0.5;
  data_w[3] = 0.0;
  AdamW opt({&store});
  auto g = w.mutable_grad();
  g[0] = 3.0;
  g[1] = -2.0;
  g[2] = 0.0;
  g[3] = 1e-3;
  opt.step(0.1);
  // m_hat / sqrt(v_hat) = sign(g) for the first step, plus decoupled decay.
  auto expect = [](double w0, double s) {
    return static_cast<double>(static_cast<float>(w0 - 0.1 * (s + AdamW::kWeightDecay * w0)));
  };
  CHECK(w.at(0) == doctest::Approx(expect(1.0, 3.0 / (3.0 + 1e-8))).epsilon(1e-7));
  CHECK(w.at(1) == doctest::Approx(expect(-1.0, -2.0 / (2.0 + 1e-8))).epsilon(1e-7));
  CHECK(w.at(2) == static_cast<double>(static_cast<float>(0.5 - 0.1 * 0.01 * 0.5)));
  CHECK(w.at(3) == doctest::Approx(-0.1 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-6));
  for (double v : w.data()) CHECK(v == static_cast<double>(static_cast<float>(v)));
}

TEST_CASE("divergence monitor trips after 100 consecutive steps above 10x the first loss") {
  DivergenceMonitor m;
  CHECK(!m.update(1.0));
  for (int i = 0; i < 99; ++i) CHECK(!m.update(11.0));
  CHECK(!m.update(9.0));  // resets the run
  for (int i = 0; i < 99; ++i) CHECK(!m.update(10.5));
  CHECK(m.update(10.5));
}

TEST_CASE("checkpoint resume is bit-identical to an uninterrupted run") {
  const auto dir = scratch("resume");
  auto run = [](Model& model, std::size_t steps) {
    TrainConfig c;
    c.phase = Phase::Control;
    c.lr = 1e-3;
    c.batch = 1;
    c.steps = 6;
    c.seed = 77;
    auto st = begin_training(model, c);
    train_steps(model, st, data(), steps);
    return st;
  };

  Model full(tiny_model());
  pretrain(full);
  auto full_state = run(full, 6);

  Model half(tiny_model());
  pretrain(half);
  auto half_state = run(half, 3);
  save_checkpoint(dir, half, &half_state);
  auto loaded = load_checkpoint(dir);
  REQUIRE(loaded.state.has_value());
  CHECK(loaded.state->step == 3);
  CHECK(loaded.model->stage() == Stage::Control);
  train_steps(*loaded.model, *loaded.state, data(), 10);
  CHECK(loaded.state->step == 6);

  CHECK(stores_equal(full.backbone_store(), loaded.model->backbone_store()));
  CHECK(stores_equal(full.pam_store(), loaded.model->pam_store()));
  CHECK(stores_equal(full.control_store(), loaded.model->control_store()));
  CHECK(full_state.losses == loaded.state->losses);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint errors") {
  const auto dir = scratch("errors");
  CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  Model model(tiny_model());
  save_checkpoint(dir, model);
  auto loaded = load_checkpoint(dir);
  CHECK(!loaded.state.has_value());
  CHECK(stores_equal(model.backbone_store(), loaded.model->backbone_store()));
  {
    std::ofstream os(dir / "params.bin", std::ios::binary | std::ios::trunc);
    os << "junk";
  }
  CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  {
    std::ofstream os(dir / "meta.json", std::ios::trunc);
    os << "{\"format\": \"other\"}";
  }
  CHECK_THROWS_AS(load_checkpoint(dir), CheckpointError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("loss log format") {
  std::ostringstream os;
  write_loss_log(os, {2.5, 1.25});
  CHECK(os.str() == "#format mosaic-losslog 1\nstep 1 2.5\nstep 2 1.25\n");
}

TEST_CASE("config JSON round trip and unknown keys") {
  TrainConfig c;
  c.phase = Phase::Backbone;
  c.lr = 3e-4;
  c.batch = 7;
  c.fourier = FourierOptions{0.5, 2.0};
  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(back.phase == Phase::Backbone);
  CHECK(back.lr == 3e-4);
  CHECK(back.batch == 7);
  REQUIRE(back.fourier.has_value());
  CHECK(back.fourier->alpha == 0.5);
  CHECK_THROWS_AS(train_config_from_json(Json{{"lr", 1e-3}, {"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(Json{{"batch", -2}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(Json{{"lr", 0.0}}), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(Json{{"d", 10}, {"heads", 3}}), ConfigError);
  const ModelConfig m = model_config_from_json(to_json(tiny_model(9)));
  CHECK(m.d == 8);
  CHECK(m.init_seed == 9);
}

TEST_CASE("sampler contract") {
  Model model(tiny_model());
  pretrain(model);
  const auto& s = data()[1];
  SampleRequest req;
  req.text = s.text;
  req.conditions = all_conditions(s);
  req.seed = 5;
  req.steps = 0;
  CHECK_THROWS_AS(sample(model, req), std::invalid_argument);
  req.steps = kSampleSteps;

  const auto a = sample(model, req);
  const auto b = sample(model, req);
  CHECK(bit_equal(a.image, b.image));
  REQUIRE(a.traces.size() == 25);
  for (const auto& tr : a.traces) CHECK_NOTHROW(pam::validate_trace(tr));
  for (double v : a.image.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // A control stack that has never been trained adds exact zeros.
  SampleRequest plain = req;
  plain.mode = SampleMode::BackboneOnly;
  const auto base = sample(model, plain);
  CHECK(base.traces.empty());
  CHECK(bit_equal(a.image, base.image));

  SampleRequest other = req;
  other.seed = 6;
  CHECK(!bit_equal(sample(model, other).image, a.image));

  SampleRequest rnd = req;
  rnd.mode = SampleMode::Random;
  const auto r1 = sample(model, rnd), r2 = sample(model, rnd);
  CHECK(bit_equal(r1.image, r2.image));
  CHECK(r1.traces.size() == 25);
  CHECK(r1.traces[0].assignment != r1.traces[1].assignment);
}

TEST_CASE("euler sampler integrates a known velocity field") {
  // With the backbone head zero the velocity is 0 and the image is the
  // clamped starting noise.
  Model model(tiny_model());
  SampleRequest req;
  req.mode = SampleMode::BackboneOnly;
  req.seed = 12;
  const auto out = sample(model, req);
  CHECK(bit_equal(out.image, clamp01(initial_noise(12, 32))));
}

TEST_CASE("fourier band algebra") {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({3, 16, 16}, rng);
  const ComplexGrid f = fft2(x);

  SUBCASE("high band scale saturates at 3/2") {
    for (double t : {2.0 / 3.0, 0.7, 0.9, 1.0}) CHECK(high_band_scale(t) == 1.5);
    CHECK(high_band_scale(0.5) == 2.0);
    FourierOptions o;
    o.alpha = 0.3;
    const auto g = correct_spectrum(f, 0.8, o);
    const auto mask = low_pass_mask(16, 16, o.radius(16));
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      if (mask[i % 256] == 0.0) {
        CHECK(g.values[i] == f.values[i] * 1.5);
      } else {
        CHECK(g.values[i] == f.values[i] * (0.3 * 0.8));
      }
    }
  }

  SUBCASE("masked bands split the energy") {
    for (double r : {0.0, 1.0, 2.0, 5.5}) {
      const Bands b = split_bands(f, r);
      double el = 0, eh = 0, ef = 0;
      for (std::size_t i = 0; i < f.values.size(); ++i) {
        el += std::norm(b.low.values[i]);
        eh += std::norm(b.high.values[i]);
        ef += std::norm(f.values[i]);
      }
      CHECK(std::abs(el + eh - ef) <= 1e-9 * ef);
      // Parseval against the spatial energy.
      CHECK(std::abs(ef / 256.0 - ops::sum_squares(x).item()) <= 1e-9 * ef);
    }
  }

  SUBCASE("full-spectrum low mask with alpha 1 and t 1 round-trips") {
    FourierOptions o;
    o.alpha = 1.0;
    o.cutoff = 100.0;
    CHECK(max_abs_diff(fourier_filter(x, 1.0, o), x) < 1e-9);
  }

  SUBCASE("mask is symmetric and the default radius is a quarter of Nyquist") {
    FourierOptions o;
    CHECK(o.radius(16) == 2.0);
    const auto mask = low_pass_mask(16, 16, 2.0);
    for (std::size_t ky = 0; ky < 16; ++ky)
      for (std::size_t kx = 0; kx < 16; ++kx)
        CHECK(mask[ky * 16 + kx] == mask[((16 - ky) % 16) * 16 + (16 - kx) % 16]);
    CHECK(mask[0] == 1.0);
    CHECK(mask[2] == 1.0);
    CHECK(mask[3] == 0.0);
    CHECK(mask[1 * 16 + 1] == 1.0);
    CHECK(mask[2 * 16 + 2] == 0.0);
  }

  SUBCASE("t outside (0, 1] is rejected") {
    FourierOptions o;
    CHECK_THROWS_AS(fourier_filter(x, 0.0, o), std::domain_error);
    CHECK_THROWS_AS(fourier_filter(x, 1.5, o), std::domain_error);
    CHECK_THROWS_AS(fourier_correct(Tensor::zeros({256, 4}), 16, 0.0, o), std::domain_error);
  }
}

TEST_CASE("fourier_correct layout and gradient") {
  std::mt19937_64 rng(8);
  const Tensor r = random_tensor({256, 3}, rng);
  FourierOptions o;
  const Tensor c = fourier_correct(r, 16, 0.4, o);
  // Channel 1 alone equals the plane filter of that channel.
  std::vector<double> plane(256);
  for (std::size_t p = 0; p < 256; ++p) plane[p] = r.at(p, 1);
  const Tensor ref = fourier_filter(Tensor({16, 16}, plane), 0.4, o);
  for (std::size_t p = 0; p < 256; ++p) CHECK(c.at(p, 1) == doctest::Approx(ref.at(p)).epsilon(1e-12));
  CHECK_THROWS_AS(fourier_correct(Tensor::zeros({255, 3}), 16, 0.4, o), ShapeError);

  Tensor leaf = r.clone();
  leaf.set_requires_grad(true);
  const Tensor w = random_tensor({256, 3}, rng);
  auto f = [&](const Tensor& x) { return ops::sum(ops::mul(fourier_correct(x, 16, 0.4, o), w)); };
  CHECK(grad_check(f, leaf, 1e-5, 64) < 1e-6);
}

TEST_CASE("fourier option off is the uncorrected forward pass") {
  Model model(tiny_model());
  testing::randomize(model.backbone_store(), 5, 0.1);
  testing::randomize(model.control_store(), 4, 0.1);
  const auto& s = data()[2];
  std::mt19937_64 rng(3);
  const Tensor z = random_tensor({32, 32}, rng);
  NoGradGuard guard;
  const Tensor y = model.text(s.text);
  const auto conds = all_conditions(s);
  const auto plain = model.controlled_velocity(z, 0.5, y, conds);

  const Tensor o_t = model.control().time_embed(0.5);
  const auto sel = model.pam().adapt(conds, y, o_t);
  const auto sig = model.control().forward(sel.sp, y, o_t);
  CHECK(bit_equal(plain.velocity, model.backbone().forward(z, 0.5, y, &sig)));

  ForwardOptions fo;
  fo.fourier = FourierOptions{};
  CHECK(!bit_equal(model.controlled_velocity(z, 0.5, y, conds, fo).velocity, plain.velocity));
}

TEST_CASE("control-phase loss gradient through PAM, control and injection") {
  Model model(tiny_model());
  testing::randomize(model.backbone_store(), 1, 0.2);
  testing::randomize(model.pam_store(), 2, 0.2);
  testing::randomize(model.control_store(), 3, 0.2);
  model.backbone_store().set_requires_grad(false);
  const auto& s = data()[3];
  std::mt19937_64 rng(2);
  const Tensor noise = random_tensor({32, 32}, rng);
  const double t = 0.35;
  const Tensor z = backbone::interpolate(s.image, noise, t);
  const Tensor target = backbone::target_velocity(s.image, noise);
  const auto conds = all_conditions(s);

  pam::SelectionTrace trace;
  {
    NoGradGuard g;
    trace = model.controlled_velocity(z, t, model.text(s.text), conds).trace;
  }
  ForwardOptions fo;
  fo.replay = &trace;
  fo.fourier = FourierOptions{};
  auto loss = [&](const Tensor&) {
    return flow_loss(model.controlled_velocity(z, t, model.text(s.text), conds, fo).velocity, target);
  };
  for (const char* name : {"enc.depth.w", "isb.sketch.score.w", "isb.sp.qkv.w"}) {
    model.pam_store().zero_grad();
    CHECK_MESSAGE(grad_check(loss, model.pam_store().get(name), 1e-3, 6, Stencil::FivePoint) < 1e-4, name);
  }
  for (const char* name : {"dsb0.img_out.w", "ssb0.ff.out.w", "time.fc1.w"}) {
    model.control_store().zero_grad();
    CHECK_MESSAGE(grad_check(loss, model.control_store().get(name), 1e-3, 6, Stencil::FivePoint) < 1e-4, name);
  }
}
