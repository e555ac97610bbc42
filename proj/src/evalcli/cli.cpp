#include "mosaic/evalcli/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mosaic/evalcli/artifacts.hpp"
#include "mosaic/evalcli/run_config.hpp"
#include "mosaic/evalcli/selftest.hpp"
#include "mosaic/evalcli/ssim.hpp"
#include "mosaic/pipeline/train.hpp"
#include "mosaic/synthdata/dataset_io.hpp"

namespace mosaic::evalcli {
namespace {

namespace fs = std::filesystem;
using pipeline::Json;

struct CliError : std::runtime_error {
  CliError(int code, std::string kind, const std::string& msg)
      : std::runtime_error(msg), code(code), kind(std::move(kind)) {}
  int code;
  std::string kind;
};

CliError bad_config(const std::string& m) { return {kExitBadConfig, "bad_config", m}; }
CliError io_error(const std::string& m) { return {kExitIo, "io", m}; }

// Flag values collected by CLI11; applied over the JSON config afterwards.
struct Flags {
  std::string config, out;
  std::uint64_t data_seed = 0;
  std::size_t data_count = 0;
  std::string data_dir;
  std::size_t steps = 0, batch = 0, checkpoint_every = 0;
  double lr = 0.0;
  std::uint64_t train_seed = 0;
  std::string checkpoint, backbone, resume, trace_file;
  std::size_t count = 0, first = 0, sample_steps = 0;
  std::uint64_t sample_seed = 0;
  std::string conditions;
  std::vector<std::string> subsets, modes;
  bool trace = false, fourier = false, no_dropout = false;
};

// Remembers which options were given on the command line. Several
// subcommands register the same name; only one subcommand is ever parsed.
struct Given {
  std::multimap<std::string, CLI::Option*> opts;
  bool operator()(const std::string& name) const {
    auto [lo, hi] = opts.equal_range(name);
    for (auto it = lo; it != hi; ++it)
      if (it->second->count() > 0) return true;
    return false;
  }
};

template <typename T>
void opt(CLI::App* app, Given& g, const std::string& name, T& var, const std::string& help) {
  g.opts.emplace(name, app->add_option("--" + name, var, help));
}

void common(CLI::App* app, Flags& f, Given& g) {
  opt(app, g, "config", f.config, "JSON run configuration (unknown keys are rejected)");
  opt(app, g, "out", f.out, "output root (default $" + std::string(kOutDirEnv) + " or ./mosaic_out)");
}

void data_flags(CLI::App* app, Flags& f, Given& g) {
  opt(app, g, "data-dir", f.data_dir, "dataset directory written by gen-data");
  opt(app, g, "data-seed", f.data_seed, "dataset seed when no directory is given");
  opt(app, g, "data-count", f.data_count, "dataset size when no directory is given");
}

void train_flags(CLI::App* app, Flags& f, Given& g) {
  data_flags(app, f, g);
  opt(app, g, "steps", f.steps, "optimizer steps");
  opt(app, g, "batch", f.batch, "samples per step");
  opt(app, g, "lr", f.lr, "learning rate");
  opt(app, g, "seed", f.train_seed, "training seed");
  opt(app, g, "checkpoint-every", f.checkpoint_every, "checkpoint period in steps (0: end only)");
  opt(app, g, "resume", f.resume, "checkpoint directory to continue from");
  g.opts.emplace("fourier", app->add_flag("--fourier", f.fourier, "enable the Fourier correction"));
}

void sample_flags(CLI::App* app, Flags& f, Given& g) {
  data_flags(app, f, g);
  opt(app, g, "checkpoint", f.checkpoint, "trained checkpoint directory");
  opt(app, g, "count", f.count, "number of items");
  opt(app, g, "first", f.first, "index of the first item");
  opt(app, g, "seed", f.sample_seed, "sampling seed");
  opt(app, g, "steps", f.sample_steps, "Euler steps");
  g.opts.emplace("fourier", app->add_flag("--fourier", f.fourier, "enable the Fourier correction"));
}

Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot read config " + path);
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw bad_config(path + ": " + e.what());
  }
}

RunConfig build_config(const Flags& f, const Given& g, RunConfig base) {
  RunConfig c = std::move(base);
  if (g("config")) c = run_config_from_json(read_json_file(f.config), c);
  if (g("out")) c.out_dir = f.out;
  if (c.out_dir.empty()) c.out_dir = RunConfig::default_out_dir();
  if (g("data-dir")) c.data_dir = f.data_dir;
  if (g("data-seed")) c.data_seed = f.data_seed;
  if (g("data-count")) c.data_count = f.data_count;
  if (g("batch")) c.train.batch = f.batch;
  if (g("lr")) c.train.lr = f.lr;
  if (g("checkpoint-every")) c.train.checkpoint_every = f.checkpoint_every;
  if (g("resume")) c.resume = f.resume;
  if (g("checkpoint")) c.checkpoint = f.checkpoint;
  if (g("backbone")) c.backbone = f.backbone;
  if (g("trace-file")) c.trace_file = f.trace_file;
  if (g("count")) c.sample_count = f.count;
  if (g("first")) c.sample_first = f.first;
  if (g("trace")) c.trace = f.trace;
  if (g("no-dropout")) c.train.condition_dropout = false;
  try {
    if (g("conditions")) c.conditions = parse_subset(f.conditions);
    if (g("subsets")) {
      c.subsets.clear();
      for (const auto& s : f.subsets) c.subsets.push_back(parse_subset(s));
    }
    if (g("modes") && f.modes.size() == 1) c.mode = parse_mode(f.modes.front());
  } catch (const std::invalid_argument& e) {
    throw bad_config(e.what());
  }
  return c;
}

std::vector<synth::ImageSample> load_data(const RunConfig& c) {
  if (c.data_dir.empty()) {
    if (c.data_count == 0) throw bad_config("data.count must be >= 1");
    return synth::make_dataset(c.data_seed, c.data_count);
  }
  try {
    return synth::load_dataset(c.data_dir);
  } catch (const std::exception& e) {
    throw io_error(e.what());
  }
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw io_error("cannot create " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
  if (!os) throw io_error("cannot write " + p.string());
}

pipeline::LoadedCheckpoint open_checkpoint(const fs::path& dir, const char* what) {
  if (dir.empty()) throw bad_config(std::string("no ") + what + " checkpoint given");
  if (!fs::exists(dir / "meta.json"))
    throw CliError(kExitMissingCheckpoint, "missing_checkpoint", "missing checkpoint: " + dir.string());
  try {
    return pipeline::load_checkpoint(dir);
  } catch (const pipeline::CheckpointError& e) {
    throw io_error(e.what());
  }
}

std::vector<synth::ImageSample> item_range(const std::vector<synth::ImageSample>& data, const RunConfig& c) {
  if (c.sample_first + c.sample_count > data.size())
    throw bad_config("requested items [" + std::to_string(c.sample_first) + ", " +
                     std::to_string(c.sample_first + c.sample_count) + ") but the dataset has " +
                     std::to_string(data.size()));
  return {data.begin() + static_cast<std::ptrdiff_t>(c.sample_first),
          data.begin() + static_cast<std::ptrdiff_t>(c.sample_first + c.sample_count)};
}

std::string numbered(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04zu%s", prefix, i, ext);
  return buf;
}

int cmd_gen_data(const RunConfig& c, std::ostream& out) {
  const fs::path dir = c.data_dir.empty() ? c.out_dir / "data" : c.data_dir;
  if (c.data_count == 0) throw bad_config("data.count must be >= 1");
  ensure_dir(dir);
  try {
    synth::write_dataset(dir, c.data_seed, synth::make_dataset(c.data_seed, c.data_count));
  } catch (const std::exception& e) {
    throw io_error(e.what());
  }
  out << "wrote " << c.data_count << " samples to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& c, pipeline::Phase phase, std::ostream& out) {
  const auto data = load_data(c);
  std::unique_ptr<pipeline::Model> model;
  std::optional<pipeline::TrainState> state;
  if (!c.resume.empty()) {
    auto ck = open_checkpoint(c.resume, "resume");
    if (!ck.state) throw bad_config("checkpoint " + c.resume.string() + " has no training state");
    if (ck.state->cfg.phase != phase) throw bad_config("resume checkpoint is from another phase");
    model = std::move(ck.model);
    state = std::move(ck.state);
    state->cfg.steps = std::max(state->cfg.steps, c.train.steps);
  } else if (phase == pipeline::Phase::Control) {
    auto ck = open_checkpoint(c.backbone, "backbone");
    model = std::move(ck.model);
    state.emplace(pipeline::begin_training(*model, c.train));
  } else {
    model = std::make_unique<pipeline::Model>(c.model);
    state.emplace(pipeline::begin_training(*model, c.train));
  }
  const fs::path dir = c.out_dir / pipeline::phase_name(phase);
  ensure_dir(dir);
  write_text(c.out_dir / (std::string(pipeline::phase_name(phase)) + ".config.json"), to_json(c).dump(2) + "\n");
  const std::size_t every = std::max<std::size_t>(1, state->cfg.steps / 20);
  pipeline::train(*model, *state, data, dir, [&](std::size_t step, double loss) {
    if (step % every == 0 || step == state->cfg.steps)
      out << "step " << step << " loss " << std::setprecision(6) << loss << '\n';
  });
  out << "checkpoint " << dir.string() << '\n';
  return kExitOk;
}

void write_traces(const fs::path& dir, const std::vector<pam::SelectionTrace>& traces) {
  ensure_dir(dir);
  std::ofstream os(dir / "trace.txt");
  pam::write_trace_header(os);
  for (std::size_t k = 0; k < traces.size(); ++k) {
    pam::write_trace_records(os, k, traces[k]);
    write_colormap(dir / numbered("step_", k, ".ppm"), traces[k]);
  }
  if (!os) throw io_error("cannot write " + (dir / "trace.txt").string());
}

int cmd_sample(const RunConfig& c, std::ostream& out) {
  auto ck = open_checkpoint(c.checkpoint, "model");
  const auto items = item_range(load_data(c), c);
  const fs::path dir = c.out_dir / "samples";
  ensure_dir(dir);
  for (std::size_t i = 0; i < items.size(); ++i) {
    pipeline::SampleRequest req;
    req.text = items[i].text;
    req.conditions = pipeline::condition_inputs(items[i], c.conditions);
    req.steps = c.sample_steps;
    req.seed = item_seed(c.sample_seed, i);  // same seeds as eval over this range
    req.mode = c.mode;
    req.fourier = c.fourier;
    const auto r = pipeline::sample(*ck.model, req);
    const std::size_t idx = c.sample_first + i;
    write_pgm(dir / numbered("item_", idx, ".pgm"), r.image);
    write_pgm(dir / numbered("item_", idx, "_ref.pgm"), items[i].image);
    if (c.trace && !r.traces.empty()) write_traces(dir / numbered("item_", idx, "_trace"), r.traces);
    out << "item " << idx << " ssim " << std::setprecision(6) << ssim(r.image, items[i].image) << '\n';
  }
  return kExitOk;
}

std::vector<std::vector<ConditionKind>> default_nests() {
  using synth::ConditionKind;
  return {{ConditionKind::Keypoint},
          {ConditionKind::Keypoint, ConditionKind::Depth},
          {ConditionKind::Keypoint, ConditionKind::Depth, ConditionKind::Edge},
          {synth::kAllConditions.begin(), synth::kAllConditions.end()}};
}

int cmd_eval(const RunConfig& c, const std::vector<std::string>& mode_flags, std::ostream& out) {
  auto ck = open_checkpoint(c.checkpoint, "model");
  const auto items = item_range(load_data(c), c);
  std::vector<pipeline::SampleMode> modes;
  try {
    for (const auto& m : mode_flags) modes.push_back(parse_mode(m));
  } catch (const std::invalid_argument& e) {
    throw bad_config(e.what());
  }
  if (modes.empty()) modes.push_back(c.mode);
  const auto subsets = c.subsets.empty() ? default_nests() : c.subsets;

  const fs::path dir = c.out_dir / "eval";
  ensure_dir(dir);
  std::vector<EvalReport> reports;
  for (auto mode : modes) {
    for (const auto& s : subsets) {
      EvalOptions o;
      o.subset = s;
      o.seed = c.sample_seed;
      o.steps = c.sample_steps;
      o.mode = mode;
      o.fourier = c.fourier;
      reports.push_back(eval_run(*ck.model, items, o));
      std::ostringstream rs;
      write_report(rs, reports.back());
      write_text(dir / ("report_" + reports.back().label + "_" + mode_name(mode) + ".txt"), rs.str());
    }
  }
  std::ostringstream ss;
  write_summary(ss, reports);
  write_text(dir / "summary.txt", ss.str());
  out << ss.str();
  return kExitOk;
}

int cmd_trace_viz(const RunConfig& c, std::ostream& out) {
  if (c.trace_file.empty()) throw bad_config("no trace file given");
  std::ifstream is(c.trace_file);
  if (!is) throw io_error("cannot read " + c.trace_file.string());
  std::map<std::size_t, pam::SelectionTrace> traces;
  try {
    traces = read_trace_records(is);
  } catch (const std::runtime_error& e) {
    throw io_error(c.trace_file.string() + ": " + e.what());
  }
  const fs::path dir = c.out_dir / "trace_viz";
  ensure_dir(dir);
  for (const auto& [k, tr] : traces) write_colormap(dir / numbered("step_", k, ".ppm"), tr);
  out << "wrote " << traces.size() << " colormaps to " << dir.string() << '\n';
  return kExitOk;
}

std::string json_escape_record(const std::string& kind, const std::string& msg, int code) {
  return Json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mosaic: patch-adaptive multi-condition control on a toy flow model"};
  app.require_subcommand(1, 1);
  Flags f;
  Given g;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset (manifest plus blobs)");
  common(gen, f, g);
  opt(gen, g, "seed", f.data_seed, "dataset seed");
  opt(gen, g, "count", f.data_count, "number of samples");
  opt(gen, g, "dir", f.data_dir, "target directory (default <out>/data)");

  auto* tb = app.add_subcommand("train-backbone", "train the text-to-image flow backbone");
  common(tb, f, g);
  train_flags(tb, f, g);

  auto* tc = app.add_subcommand("train-control", "train the selection module and control stack");
  common(tc, f, g);
  train_flags(tc, f, g);
  opt(tc, g, "backbone", f.backbone, "pretrained backbone checkpoint directory");
  g.opts.emplace("no-dropout", tc->add_flag("--no-dropout", f.no_dropout, "disable condition dropout"));

  auto* sm = app.add_subcommand("sample", "sample images for dataset items");
  common(sm, f, g);
  sample_flags(sm, f, g);
  opt(sm, g, "conditions", f.conditions, "condition subset, e.g. keypoint,depth");
  g.opts.emplace("modes", sm->add_option("--mode", f.modes, "adaptive | random | backbone")->expected(1));
  g.opts.emplace("trace", sm->add_flag("--trace", f.trace, "write per-step selection colormaps and records"));

  auto* ev = app.add_subcommand("eval", "score samples against references per condition subset");
  common(ev, f, g);
  sample_flags(ev, f, g);
  g.opts.emplace("subsets", ev->add_option("--subset", f.subsets, "condition subset (repeatable)"));
  g.opts.emplace("modes", ev->add_option("--mode", f.modes, "selection mode (repeatable)"));

  auto* tv = app.add_subcommand("trace-viz", "render colormaps from a trace record file");
  common(tv, f, g);
  opt(tv, g, "trace-file", f.trace_file, "trace records written by sample --trace");

  auto* st = app.add_subcommand("selftest", "run the built-in invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << json_escape_record("bad_arguments", e.what(), kExitBadConfig) << '\n';
    return kExitBadConfig;
  }

  try {
    if (st->parsed()) {
      const auto s = run_selftest(out);
      return s.failed ? kExitSelftest : kExitOk;
    }
    RunConfig base;
    if (tb->parsed()) {
      base.train.phase = pipeline::Phase::Backbone;
      base.train.lr = pipeline::kBackboneLr;
    }
    RunConfig c = build_config(f, g, base);
    // Flags named alike in several subcommands map to different fields.
    if (gen->parsed()) {
      if (g("seed")) c.data_seed = f.data_seed;
      if (g("count")) c.data_count = f.data_count;
      if (g("dir")) c.data_dir = f.data_dir;
      return cmd_gen_data(c, out);
    }
    if (g("steps")) {
      if (sm->parsed() || ev->parsed())
        c.sample_steps = f.sample_steps;
      else
        c.train.steps = f.steps;
    }
    if (g("seed")) {
      if (sm->parsed() || ev->parsed())
        c.sample_seed = f.sample_seed;
      else
        c.train.seed = f.train_seed;
    }
    if (g("fourier") && f.fourier && !c.fourier) {
      if (sm->parsed() || ev->parsed())
        c.fourier = pipeline::FourierOptions{};
      else
        c.train.fourier = pipeline::FourierOptions{};
    }
    if (c.sample_steps == 0) throw bad_config("steps must be >= 1");
    try {
      c.model.validate();
      c.train.validate();
    } catch (const std::invalid_argument& e) {
      throw bad_config(e.what());
    }
    if (tb->parsed()) return cmd_train(c, pipeline::Phase::Backbone, out);
    if (tc->parsed()) return cmd_train(c, pipeline::Phase::Control, out);
    if (sm->parsed()) return cmd_sample(c, out);
    if (ev->parsed()) return cmd_eval(c, f.modes, out);
    if (tv->parsed()) return cmd_trace_viz(c, out);
    throw CliError(kExitInternal, "internal", "no subcommand dispatched");
  } catch (const CliError& e) {
    err << json_escape_record(e.kind, e.what(), e.code) << '\n';
    return e.code;
  } catch (const pipeline::ConfigError& e) {
    err << json_escape_record("bad_config", e.what(), kExitBadConfig) << '\n';
    return kExitBadConfig;
  } catch (const pipeline::PhaseError& e) {
    err << json_escape_record("bad_config", e.what(), kExitBadConfig) << '\n';
    return kExitBadConfig;
  } catch (const pipeline::DivergenceError& e) {
    err << json_escape_record("training_failed", e.what(), kExitTraining) << '\n';
    return kExitTraining;
  } catch (const NonFiniteError& e) {
    err << json_escape_record("training_failed", e.what(), kExitTraining) << '\n';
    return kExitTraining;
  } catch (const pipeline::CheckpointError& e) {
    err << json_escape_record("io", e.what(), kExitIo) << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    err << json_escape_record("io", e.what(), kExitIo) << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << json_escape_record("io", e.what(), kExitIo) << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << json_escape_record("bad_config", e.what(), kExitBadConfig) << '\n';
    return kExitBadConfig;
  } catch (const std::exception& e) {
    err << json_escape_record("internal", e.what(), kExitInternal) << '\n';
    return kExitInternal;
  }
}

}  // namespace mosaic::evalcli
