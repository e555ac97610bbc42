// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                   all criteria, training on demand
//   acceptance --prepare         train the shared backbone and control checkpoints only
//   acceptance --only 2,9        selected criteria
//   acceptance --work-dir DIR    where checkpoints and reports go
//   acceptance --reuse           keep finished checkpoints found in the work dir
//
// Exit status is 0 only when every selected criterion passes.

#include <CLI11.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mosaic/evalcli/cli.hpp"
#include "mosaic/evalcli/report.hpp"
#include "mosaic/numerics/grad_check.hpp"
#include "mosaic/numerics/kernels.hpp"
#include "mosaic/numerics/runtime.hpp"
#include "mosaic/numerics/tape.hpp"
#include "mosaic/numerics/top_r.hpp"
#include "mosaic/pipeline/train.hpp"
#include "test_util.hpp"

using namespace mosaic;
namespace fs = std::filesystem;
using pipeline::Model;
using pipeline::ModelConfig;
using synth::ConditionKind;

namespace {

// ---- shared settings ---------------------------------------------------------

constexpr std::uint64_t kTrainDataSeed = 1;
constexpr std::size_t kTrainCount = 256;
constexpr std::uint64_t kHeldOutSeed = 2;
constexpr std::size_t kEvalItems = 64;
constexpr std::size_t kSelectionImages = 500;
constexpr std::uint64_t kEvalSeed = 7;

constexpr std::size_t kBackboneSteps = 3000;
constexpr std::size_t kBackboneBatch = 8;
constexpr std::size_t kControlSteps = 3000;
constexpr std::size_t kControlBatch = 4;
constexpr double kControlFullLr = 5e-4;

constexpr std::size_t kSmokeSteps = 500;
constexpr std::size_t kSmokeBatch = 8;
constexpr std::size_t kSmokeWindow = 50;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<ConditionKind> all_kinds() { return {synth::kAllConditions.begin(), synth::kAllConditions.end()}; }

Tensor uniform_map(std::mt19937_64& rng, std::size_t h = 32, std::size_t w = 32) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(h * w);
  for (auto& x : v) x = u(rng);
  return Tensor({h, w}, std::move(v));
}

std::vector<ConditionKind> random_subset(std::mt19937_64& rng) {
  std::vector<ConditionKind> s;
  while (s.empty())
    for (auto k : synth::kAllConditions)
      if (rng() & 1) s.push_back(k);
  return s;
}

const std::vector<synth::ImageSample>& train_data() {
  static const auto d = synth::make_dataset(kTrainDataSeed, kTrainCount);
  return d;
}

const std::vector<synth::ImageSample>& held_out() {
  static const auto d = synth::make_dataset(kHeldOutSeed, kSelectionImages);
  return d;
}

// ---- shared training ---------------------------------------------------------

struct Context {
  fs::path work;
  bool reuse = false;
  std::unique_ptr<Model> backbone_model;
  std::unique_ptr<Model> control_model;
  std::map<std::string, evalcli::EvalReport> reports;
};

bool finished(const fs::path& dir, std::size_t steps) {
  if (!fs::exists(dir / "meta.json")) return false;
  std::ifstream is(dir / "meta.json");
  try {
    return pipeline::Json::parse(is).at("step").get<std::size_t>() == steps;
  } catch (...) {
    return false;
  }
}

void log_progress(const char* phase, std::size_t step, std::size_t total, double loss) {
  if (step % 250 == 0 || step == total)
    std::printf("  [%s] step %zu/%zu loss %.3f\n", phase, step, total, loss), std::fflush(stdout);
}

const Model& backbone_model(Context& ctx) {
  if (ctx.backbone_model) return *ctx.backbone_model;
  const fs::path dir = ctx.work / "backbone";
  if (!(ctx.reuse && finished(dir, kBackboneSteps))) {
    Model model(ModelConfig{});
    pipeline::TrainConfig c;
    c.phase = pipeline::Phase::Backbone;
    c.lr = pipeline::kBackboneLr;
    c.batch = kBackboneBatch;
    c.steps = kBackboneSteps;
    c.seed = 11;
    c.checkpoint_every = 500;
    auto st = pipeline::begin_training(model, c);
    pipeline::train(model, st, train_data(), dir,
                    [](std::size_t s, double l) { log_progress("backbone", s, kBackboneSteps, l); });
  }
  ctx.backbone_model = pipeline::load_checkpoint(dir).model;
  return *ctx.backbone_model;
}

const Model& control_model(Context& ctx) {
  if (ctx.control_model) return *ctx.control_model;
  const fs::path dir = ctx.work / "control";
  if (!(ctx.reuse && finished(dir, kControlSteps))) {
    backbone_model(ctx);
    auto model = pipeline::load_checkpoint(ctx.work / "backbone").model;
    pipeline::TrainConfig c;
    c.phase = pipeline::Phase::Control;
    c.lr = kControlFullLr;
    c.batch = kControlBatch;
    c.steps = kControlSteps;
    c.seed = 13;
    c.checkpoint_every = 500;
    auto st = pipeline::begin_training(*model, c);
    pipeline::train(*model, st, train_data(), dir,
                    [](std::size_t s, double l) { log_progress("control", s, kControlSteps, l); });
  }
  ctx.control_model = pipeline::load_checkpoint(dir).model;
  return *ctx.control_model;
}

const evalcli::EvalReport& report(Context& ctx, const std::vector<ConditionKind>& subset,
                                  pipeline::SampleMode mode, std::size_t items) {
  const std::string key = evalcli::subset_label(subset) + "/" + evalcli::mode_name(mode) + "/" +
                          std::to_string(items);
  auto it = ctx.reports.find(key);
  if (it != ctx.reports.end()) return it->second;
  evalcli::EvalOptions o;
  o.subset = subset;
  o.seed = kEvalSeed;
  o.mode = mode;
  const std::vector<synth::ImageSample> sel(held_out().begin(),
                                            held_out().begin() + static_cast<std::ptrdiff_t>(items));
  auto r = evalcli::eval_run(control_model(ctx), sel, o);
  fs::create_directories(ctx.work / "reports");
  std::ofstream os(ctx.work / "reports" / ("report_" + r.label + "_" + evalcli::mode_name(mode) + "_" +
                                            std::to_string(items) + ".txt"));
  evalcli::write_report(os, r);
  return ctx.reports.emplace(key, std::move(r)).first->second;
}

// ---- criteria ----------------------------------------------------------------

Outcome c1_zero_init(Context&) {
  Model model(ModelConfig{});
  testing::randomize(model.backbone_store(), 101, 0.1);
  model.reset_control();
  model.set_stage(pipeline::Stage::Control);
  std::mt19937_64 rng(1);
  std::size_t equal = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto s = synth::make_sample(synth::generate_scene(rng()));
    pipeline::SampleRequest req;
    req.text = s.text;
    req.conditions = pipeline::condition_inputs(s, random_subset(rng));
    req.seed = rng();
    const auto controlled = pipeline::sample(model, req);
    req.mode = pipeline::SampleMode::BackboneOnly;
    const auto plain = pipeline::sample(model, req);
    equal += bit_equal(controlled.image, plain.image) && controlled.traces.size() == 25;
  }
  return {equal == 20, std::to_string(equal) + "/20 condition sets bit-identical to backbone-only sampling"};
}

// Checks one trace against the partition contract directly.
std::string partition_error(const pam::SelectionTrace& tr, const std::set<int>& allowed) {
  if (tr.m != 256 || tr.n_p != 16) return "wrong m or n_p";
  if (tr.picks.size() != 256) return "trace has " + std::to_string(tr.picks.size()) + " picks";
  std::vector<int> seen(256, 0);
  std::vector<int> per_iter(16, 0);
  for (const auto& p : tr.picks) {
    if (p.iteration >= 16) return "iteration out of range";
    if (p.position >= 256) return "position out of range";
    if (!allowed.count(p.condition)) return "condition outside the input set";
    ++per_iter[p.iteration];
    if (seen[p.position]++) return "position selected twice";
    if (tr.assignment[p.position] != p.condition) return "assignment disagrees with picks";
  }
  for (int c : per_iter)
    if (c != 16) return "an iteration without 16 selections";
  try {
    pam::validate_trace(tr);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

Outcome c2_partition(Context&) {
  const ModelConfig mc;
  ParameterStore store;
  pam::PatchAdapter pa(store, mc.pam());
  store.initialize(2);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> sd(0.02, 0.6);
  std::uniform_int_distribution<std::size_t> text_len(1, 8);
  std::size_t ok = 0;
  std::string first_error;
  NoGradGuard guard;
  for (std::size_t call = 0; call < 1000; ++call) {
    testing::randomize(store, rng(), sd(rng));
    const auto kinds = random_subset(rng);
    std::vector<pam::ConditionInput> conds;
    const auto scene = synth::make_sample(synth::generate_scene(rng()));
    std::set<int> allowed;
    for (auto k : kinds) {
      conds.push_back({k, call % 2 ? uniform_map(rng) : scene.condition(k)});
      allowed.insert(static_cast<int>(k));
    }
    const Tensor y = testing::random_tensor({text_len(rng), mc.d}, rng);
    const Tensor o_t = testing::random_tensor({1, mc.d}, rng);
    const auto err = partition_error(pa.adapt(conds, y, o_t).trace, allowed);
    if (err.empty())
      ++ok;
    else if (first_error.empty())
      first_error = "call " + std::to_string(call) + ": " + err;
  }
  return {ok == 1000, std::to_string(ok) + "/1000 traces are 16 x 16 partitions of 256 positions" +
                          (first_error.empty() ? "" : "; " + first_error)};
}

Outcome c3_degeneracy(Context&) {
  const ModelConfig mc;
  ParameterStore store;
  pam::PatchAdapter pa(store, mc.pam());
  store.initialize(3);
  std::mt19937_64 rng(3);
  std::size_t ok = 0;
  NoGradGuard guard;
  for (std::size_t i = 0; i < 100; ++i) {
    testing::randomize(store, rng(), 0.3);
    const auto k = synth::kAllConditions[rng() % synth::kNumConditions];
    const Tensor map = uniform_map(rng);
    const Tensor y = testing::random_tensor({4, mc.d}, rng), o_t = testing::random_tensor({1, mc.d}, rng);
    ok += bit_equal(pa.adapt({{k, map}}, y, o_t).sp, pa.encode(map, k));
  }
  return {ok == 100, std::to_string(ok) + "/100 single-condition outputs bit-equal to the encoder"};
}

Outcome c4_top_r(Context&) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> len(1, 300);
  std::size_t ok = 0, with_ties = 0;
  for (std::size_t i = 0; i < 10000; ++i) {
    const std::size_t n = len(rng);
    std::vector<double> v(n);
    const int kind = static_cast<int>(i % 4);
    std::uniform_int_distribution<int> small(-3, 3);
    std::normal_distribution<double> normal;
    for (auto& x : v) {
      if (kind == 0) x = small(rng);                       // heavy ties
      else if (kind == 1) x = normal(rng);                 // distinct
      else if (kind == 2) x = std::round(normal(rng) * 4) / 4;
      else x = rng() % 5 == 0 ? -std::numeric_limits<double>::infinity() : small(rng);
    }
    const std::size_t r = rng() % (n + 1);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    idx.resize(r);
    ok += top_r(v, r) == idx;
    std::set<double> distinct(v.begin(), v.end());
    with_ties += distinct.size() < v.size();
  }
  return {ok == 10000, std::to_string(ok) + "/10000 match the stable-sort oracle (" + std::to_string(with_ties) +
                           " vectors with ties)"};
}

struct GradTally {
  double worst = 0.0;
  std::string where;
  std::size_t checks = 0;
  void add(double err, const std::string& name) {
    ++checks;
    if (err > worst || std::isnan(err)) {
      worst = std::isnan(err) ? INFINITY : err;
      where = name;
    }
  }
};

Outcome c5_gradients(Context&) {
  constexpr double kTol = 1e-4;
  GradTally isb_t, blocks_t, zero_t, loss_t;
  std::mt19937_64 rng(5);
  const auto five = Stencil::FivePoint;

  {  // ISB
    ParameterStore store;
    const pam::IsbConfig cfg{16, 2, 4, 0.3, 0.5};
    const auto isb = pam::make_isb(store, "isb", cfg);
    store.initialize(5);
    const Tensor x = testing::random_leaf({24, 16}, rng), y = testing::random_leaf({4, 16}, rng),
                 o = testing::random_leaf({1, 16}, rng), w = testing::random_tensor({24, 1}, rng);
    auto f = [&](const Tensor&) { return ops::sum(ops::mul(isb(x, o, y), w)); };
    for (const Tensor& in : {x, y, o}) isb_t.add(grad_check(f, in, 1e-3, 24, five), "isb input");
    for (const auto& e : store.entries()) isb_t.add(grad_check(f, e.tensor, 1e-3, 16, five), e.name);
  }
  {  // backbone blocks, randomized so no branch is an identity
    ParameterStore store;
    const backbone::BlockConfig cfg{16, 2, 4, false};
    const auto dsb = backbone::make_double_block(store, "dsb", cfg);
    const auto ssb = backbone::make_single_block(store, "ssb", cfg);
    store.initialize(6);
    testing::randomize(store, 7, 0.2);
    const Tensor img = testing::random_leaf({24, 16}, rng), txt = testing::random_leaf({4, 16}, rng),
                 vec = testing::random_leaf({1, 16}, rng), w1 = testing::random_tensor({24, 16}, rng),
                 w2 = testing::random_tensor({4, 16}, rng), w3 = testing::random_tensor({28, 16}, rng);
    std::function<Tensor(const Tensor&)> fd = [&](const Tensor&) {
      auto o = dsb(img, txt, vec);
      return ops::add(ops::sum(ops::mul(o.img, w1)), ops::sum(ops::mul(o.txt, w2)));
    };
    std::function<Tensor(const Tensor&)> fs = [&](const Tensor&) {
      return ops::sum(ops::mul(ssb(ops::concat_rows(txt, img), vec).x, w3));
    };
    for (const Tensor& in : {img, txt, vec}) {
      blocks_t.add(grad_check(fd, in, 1e-3, 24, five), "dsb input");
      blocks_t.add(grad_check(fs, in, 1e-3, 24, five), "ssb input");
    }
    for (const auto& e : store.entries())
      blocks_t.add(grad_check(e.name[0] == 'd' ? fd : fs, e.tensor, 1e-3, 16, five), e.name);
  }

  // Full model at the acceptance width, every store randomized.
  Model model(ModelConfig{});
  testing::randomize(model.backbone_store(), 8, 0.15);
  testing::randomize(model.pam_store(), 9, 0.15);
  testing::randomize(model.control_store(), 10, 0.15);
  const auto s = synth::make_sample(synth::generate_scene(55));
  const Tensor noise = testing::random_tensor({32, 32}, rng);
  const double t = 0.4;
  const Tensor z = backbone::interpolate(s.image, noise, t);
  const Tensor target = backbone::target_velocity(s.image, noise);
  const auto conds = pipeline::condition_inputs(s, all_kinds());

  {  // Zero DSB / SSB of the control stack (projections made nonzero), through injection
    const Tensor y = model.text(s.text);
    const Tensor sp = testing::random_leaf({256, 16}, rng);
    const Tensor w = testing::random_tensor({32, 32}, rng);
    auto f = [&](const Tensor&) {
      const auto sig = model.control().forward(sp, y, model.control().time_embed(t));
      return ops::sum(ops::mul(model.backbone().forward(z, t, y, &sig), w));
    };
    model.backbone_store().set_requires_grad(false);
    zero_t.add(grad_check(f, sp, 1e-3, 24, five), "control input");
    for (const auto& e : model.control_store().entries())
      zero_t.add(grad_check(f, e.tensor, 1e-3, 4, five), e.name);
    model.backbone_store().set_requires_grad(true);
    model.control_store().zero_grad();
    model.backbone_store().zero_grad();
  }
  {  // control-phase flow loss end to end; selection replayed so it is a constant
    pam::SelectionTrace trace;
    {
      NoGradGuard g;
      trace = model.controlled_velocity(z, t, model.text(s.text), conds).trace;
    }
    pipeline::ForwardOptions fo;
    fo.replay = &trace;
    auto loss = [&](const Tensor&) {
      return pipeline::flow_loss(model.controlled_velocity(z, t, model.text(s.text), conds, fo).velocity,
                                 target);
    };
    for (auto* store : {&model.backbone_store(), &model.pam_store(), &model.control_store()}) {
      std::size_t i = 0;
      for (const auto& e : store->entries()) {
        if (i++ % 3) continue;  // every third tensor keeps this under the time budget
        loss_t.add(grad_check(loss, e.tensor, 1e-3, 2, five), e.name);
      }
    }
    model.backbone_store().zero_grad();
    model.pam_store().zero_grad();
    model.control_store().zero_grad();
  }
  const bool pass = isb_t.worst < kTol && blocks_t.worst < kTol && zero_t.worst < kTol && loss_t.worst < kTol;
  std::ostringstream d;
  d << std::setprecision(2) << "max rel err: isb " << isb_t.worst << " (" << isb_t.checks << " tensors), blocks "
    << blocks_t.worst << " (" << blocks_t.checks << "), zero blocks " << zero_t.worst << " (" << zero_t.checks
    << "), full loss " << loss_t.worst << " (" << loss_t.checks << ")";
  for (auto* g : {&isb_t, &blocks_t, &zero_t, &loss_t})
    if (g->worst >= kTol) d << "; worst at " << g->where;
  return {pass, d.str()};
}

Outcome c6_flow(Context&) {
  std::mt19937_64 rng(6);
  std::size_t exact = 0;
  double worst_loss = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Tensor x0 = uniform_map(rng), n = testing::random_tensor({32, 32}, rng);
    exact += bit_equal(backbone::interpolate(x0, n, 0.0), x0) && bit_equal(backbone::interpolate(x0, n, 1.0), n);
    const Tensor v = backbone::target_velocity(x0, n);
    worst_loss = std::max(worst_loss, std::abs(pipeline::flow_loss(v, v).item()));
  }
  return {exact == 100 && worst_loss <= 1e-12,
          std::to_string(exact) + "/100 exact endpoint pairs; perfect-predictor loss max " + fmt("%.3g", worst_loss)};
}

Outcome c7_fourier(Context&) {
  std::mt19937_64 rng(7);
  std::size_t exact = 0, n_t = 0;
  for (double t = 2.0 / 3.0; t <= 1.0; t += 1.0 / 997, ++n_t) exact += pipeline::high_band_scale(t) == 1.5;
  exact += pipeline::high_band_scale(1.0) == 1.5;
  ++n_t;
  double parseval = 0.0, round_trip = 0.0;
  pipeline::FourierOptions full;
  full.cutoff = 1e6;  // alpha 1, t 1 and a low mask over the whole spectrum
  for (std::size_t i = 0; i < 50; ++i) {
    const std::size_t size = i % 2 ? 32 : 16;
    const Tensor x = testing::random_tensor({size, size}, rng);
    const auto f = fft2(x);
    const auto b = pipeline::split_bands(f, 1.0 + static_cast<double>(i % 7));
    double el = 0, eh = 0, ef = 0;
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      el += std::norm(b.low.values[k]);
      eh += std::norm(b.high.values[k]);
      ef += std::norm(f.values[k]);
    }
    parseval = std::max(parseval, std::abs(el + eh - ef) / ef);
    round_trip = std::max(round_trip, max_abs_diff(pipeline::fourier_filter(x, 1.0, full), x));
  }
  const bool pass = exact == n_t && parseval <= 1e-9 && round_trip <= 1e-9;
  return {pass, std::to_string(exact) + "/" + std::to_string(n_t) + " t >= 2/3 give exactly 3/2; band split rel err " +
                    fmt("%.2g", parseval) + "; full-mask round trip " + fmt("%.2g", round_trip)};
}

Outcome c8_smoke(Context& ctx) {
  backbone_model(ctx);
  auto model = pipeline::load_checkpoint(ctx.work / "backbone").model;
  pipeline::TrainConfig c;
  c.phase = pipeline::Phase::Control;
  c.lr = pipeline::kControlLr;
  c.batch = kSmokeBatch;
  c.steps = kSmokeSteps;
  c.seed = 17;
  const auto t0 = std::chrono::steady_clock::now();
  auto st = pipeline::begin_training(*model, c);
  pipeline::train_steps(*model, st, train_data(), kSmokeSteps,
                        [](std::size_t s, double l) { log_progress("smoke", s, kSmokeSteps, l); });
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60;
  auto mean = [&](std::size_t from) {
    return std::accumulate(st.losses.begin() + static_cast<std::ptrdiff_t>(from),
                           st.losses.begin() + static_cast<std::ptrdiff_t>(from + kSmokeWindow), 0.0) /
           kSmokeWindow;
  };
  const double first = mean(0), last = mean(kSmokeSteps - kSmokeWindow);
  const double drop = 1.0 - last / first;
  std::ostringstream d;
  d << std::fixed << std::setprecision(2) << "mean loss first " << kSmokeWindow << " steps " << first << ", last "
    << kSmokeWindow << " " << last << ": drop " << 100 * drop << "% (need >= 30%), lr " << std::scientific << std::setprecision(0) << c.lr << std::fixed << " batch "
    << kSmokeBatch << ", " << minutes << " min";
  std::ofstream log(ctx.work / "smoke_loss.log");
  pipeline::write_loss_log(log, st.losses);
  return {drop >= 0.30, d.str()};
}

Outcome c9_trend(Context& ctx) {
  std::set<std::uint64_t> train_seeds;
  for (const auto& s : train_data()) train_seeds.insert(s.spec.seed);
  for (std::size_t i = 0; i < kEvalItems; ++i)
    if (train_seeds.count(held_out()[i].spec.seed)) return {false, "held-out item overlaps the training set"};

  const std::vector<std::vector<ConditionKind>> nests = {
      {ConditionKind::Keypoint},
      {ConditionKind::Keypoint, ConditionKind::Depth},
      {ConditionKind::Keypoint, ConditionKind::Depth, ConditionKind::Edge},
      all_kinds()};
  std::vector<double> m;
  for (const auto& n : nests) m.push_back(report(ctx, n, pipeline::SampleMode::Adaptive, kEvalItems).ssim_mean);
  bool monotone = true;
  for (std::size_t i = 1; i < m.size(); ++i) monotone &= m[i] >= m[i - 1] - 0.02;
  const double gain = m.back() - m.front();
  std::ostringstream d;
  d << std::fixed << std::setprecision(4) << "mean SSIM over " << kEvalItems << " held-out items: keypoint " << m[0]
    << ", +depth " << m[1] << ", +edge " << m[2] << ", all " << m[3] << "; all - keypoint " << gain
    << " (need >= 0.05), monotone within 0.02: " << (monotone ? "yes" : "no");
  return {gain >= 0.05 && monotone, d.str()};
}

Outcome c10_selection(Context& ctx) {
  const auto& adaptive = report(ctx, all_kinds(), pipeline::SampleMode::Adaptive, kSelectionImages);
  const auto& random = report(ctx, all_kinds(), pipeline::SampleMode::Random, kEvalItems);
  constexpr std::size_t kBuckets = 5;
  const std::size_t per = adaptive.counts.size() / kBuckets;
  // (bucket, condition) counts for both runs.
  std::vector<std::array<double, 4>> a(kBuckets, {0, 0, 0, 0}), r(kBuckets, {0, 0, 0, 0});
  for (std::size_t t = 0; t < adaptive.counts.size(); ++t)
    for (std::size_t k = 0; k < 4; ++k) {
      a[std::min(t / per, kBuckets - 1)][k] += static_cast<double>(adaptive.counts[t][k]);
      r[std::min(t / per, kBuckets - 1)][k] += static_cast<double>(random.counts[t][k]);
    }
  double max_dev = 0.0;
  std::string cell;
  for (std::size_t b = 0; b < kBuckets; ++b) {
    const double tot = a[b][0] + a[b][1] + a[b][2] + a[b][3];
    for (std::size_t k = 0; k < 4; ++k) {
      const double dev = std::abs(a[b][k] / tot - 0.25);
      if (dev > max_dev) {
        max_dev = dev;
        cell = "bucket " + std::to_string(b) + " " + synth::condition_name(synth::kAllConditions[k]);
      }
    }
  }
  // 2 x (buckets * 4) contingency test: adaptive vs random-baseline counts.
  double ta = 0, tr = 0;
  for (std::size_t b = 0; b < kBuckets; ++b)
    for (std::size_t k = 0; k < 4; ++k) ta += a[b][k], tr += r[b][k];
  double chi2 = 0.0;
  std::size_t cells = 0;
  for (std::size_t b = 0; b < kBuckets; ++b)
    for (std::size_t k = 0; k < 4; ++k) {
      const double col = a[b][k] + r[b][k];
      if (col == 0) continue;
      ++cells;
      for (const auto& [obs, row] : {std::pair{a[b][k], ta}, std::pair{r[b][k], tr}}) {
        const double e = row * col / (ta + tr);
        chi2 += (obs - e) * (obs - e) / e;
      }
    }
  const double dof = static_cast<double>(cells - 1);
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
  std::ostringstream d;
  d << "over " << adaptive.items.size() << " images: max |fraction - 0.25| = " << std::fixed << std::setprecision(2)
    << 100 * max_dev << " pp at " << cell << " (need > 1 pp); chi-square vs random baseline ("
    << random.items.size() << " images) = " << std::setprecision(1) << chi2 << " on " << dof
    << " dof, p = " << std::scientific << std::setprecision(2) << p;
  return {max_dev > 0.01 && p < 0.01, d.str()};
}

Outcome c11_fusion(Context& ctx) {
  const double a = report(ctx, all_kinds(), pipeline::SampleMode::Adaptive, kEvalItems).ssim_mean;
  const double r = report(ctx, all_kinds(), pipeline::SampleMode::Random, kEvalItems).ssim_mean;
  std::ostringstream d;
  d << std::fixed << std::setprecision(4) << "mean SSIM, all conditions, " << kEvalItems << " items: adaptive " << a
    << " vs random selection " << r;
  return {a > r, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mosaic");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = evalcli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (rc) std::cerr << err.str();
  return rc;
}

Outcome c12_determinism(Context& ctx) {
  const kernels::ScopedMode serial(kernels::Mode::Serial);
  const fs::path root = ctx.work / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "tiny.json")
      << R"({"model":{"d":8,"heads":1,"ff_mult":2,"double_blocks":1,"single_blocks":1,"init_seed":4},)"
      << R"("data":{"seed":21,"count":12},"train":{"batch":2,"seed":5},)"
      << R"("sample":{"count":4,"first":8,"steps":25,"seed":3}})";
  std::vector<std::string> reports;
  for (const char* run : {"a", "b"}) {
    const std::string out = (root / run).string(), cfg = (root / "tiny.json").string();
    if (cli({"gen-data", "--config", cfg, "--out", out}) ||
        cli({"train-backbone", "--config", cfg, "--out", out, "--steps", "50", "--data-dir", out + "/data"}) ||
        cli({"train-control", "--config", cfg, "--out", out, "--steps", "50", "--lr", "1e-3", "--backbone",
             out + "/backbone", "--data-dir", out + "/data"}) ||
        cli({"eval", "--config", cfg, "--out", out, "--checkpoint", out + "/control", "--data-dir", out + "/data",
             "--subset", "keypoint", "--subset", "edge,depth,sketch,keypoint", "--mode", "adaptive", "--mode",
             "random"}))
      return {false, std::string("end-to-end CLI run ") + run + " failed"};
    std::string all;
    for (const char* f : {"report_keypoint_adaptive.txt", "report_edge+depth+sketch+keypoint_adaptive.txt",
                          "report_keypoint_random.txt", "report_edge+depth+sketch+keypoint_random.txt",
                          "summary.txt"})
      all += slurp(root / run / "eval" / f);
    reports.push_back(all);
  }
  const bool reports_equal = !reports[0].empty() && reports[0] == reports[1];

  // 100 uninterrupted control steps vs 50 + save/load + 50.
  ModelConfig mc;
  mc.d = 8;
  mc.heads = 1;
  mc.ff_mult = 2;
  mc.double_blocks = 1;
  mc.single_blocks = 1;
  const auto data = synth::make_dataset(22, 12);
  auto run_backbone = [&](Model& m) {
    pipeline::TrainConfig c;
    c.phase = pipeline::Phase::Backbone;
    c.lr = pipeline::kBackboneLr;
    c.batch = 2;
    c.steps = 20;
    auto st = pipeline::begin_training(m, c);
    pipeline::train_steps(m, st, data, 20);
  };
  pipeline::TrainConfig cc;
  cc.phase = pipeline::Phase::Control;
  cc.lr = 1e-3;
  cc.batch = 2;
  cc.steps = 100;
  cc.seed = 9;

  Model straight(mc);
  run_backbone(straight);
  auto s1 = pipeline::begin_training(straight, cc);
  pipeline::train_steps(straight, s1, data, 100);

  Model first(mc);
  run_backbone(first);
  auto s2 = pipeline::begin_training(first, cc);
  pipeline::train_steps(first, s2, data, 50);
  pipeline::save_checkpoint(root / "half", first, &s2);
  auto resumed = pipeline::load_checkpoint(root / "half");
  pipeline::train_steps(*resumed.model, *resumed.state, data, 50);
  pipeline::save_checkpoint(root / "resumed", *resumed.model, &*resumed.state);
  pipeline::save_checkpoint(root / "straight", straight, &s1);

  const bool params_equal = slurp(root / "resumed" / "params.bin") == slurp(root / "straight" / "params.bin") &&
                            slurp(root / "resumed" / "optimizer.bin") == slurp(root / "straight" / "optimizer.bin");
  const bool losses_equal = resumed.state->losses == s1.losses;
  std::ostringstream d;
  d << "two seeded end-to-end runs give " << (reports_equal ? "bit-identical" : "DIFFERENT") << " reports ("
    << reports[0].size() << " bytes); 50 + resume + 50 vs 100 steps: parameters and optimizer "
    << (params_equal ? "bit-identical" : "DIFFER") << ", loss history " << (losses_equal ? "identical" : "differs");
  return {reports_equal && params_equal && losses_equal, d.str()};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)(Context&);
};

const std::vector<Criterion> kCriteria = {
    {1, "zero-init equivalence", c1_zero_init},
    {2, "partition invariant", c2_partition},
    {3, "single-condition degeneracy", c3_degeneracy},
    {4, "top-r oracle", c4_top_r},
    {5, "gradient checks", c5_gradients},
    {6, "flow endpoints and loss zero", c6_flow},
    {7, "fourier algebra", c7_fourier},
    {8, "training smoke", c8_smoke},
    {9, "controllability trend", c9_trend},
    {10, "selection non-uniformity", c10_selection},
    {11, "fusion baseline", c11_fusion},
    {12, "determinism and persistence", c12_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string work = "acceptance_work";
  bool prepare = false, reuse = false;
  app.add_option("--only", only, "criterion ids")->delimiter(',');
  app.add_option("--work-dir", work, "checkpoints and reports");
  app.add_flag("--prepare", prepare, "train the shared checkpoints and exit");
  app.add_flag("--reuse", reuse, "keep finished checkpoints in the work dir");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.work = work;
  ctx.reuse = reuse;
  fs::create_directories(ctx.work);

  if (prepare) {
    try {
      control_model(ctx);
      std::printf("prepared checkpoints in %s\n", ctx.work.string().c_str());
      return 0;
    } catch (const std::exception& e) {
      std::printf("prepare failed: %s\n", e.what());
      return 1;
    }
  }

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s: %s [%.1fs]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), sec);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
