#include "mosaic/evalcli/run_config.hpp"

#include <cstdlib>

namespace mosaic::evalcli {
namespace {

using pipeline::ConfigError;
using pipeline::Json;
using pipeline::require_keys;

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  try {
    const Json& v = j.at(key);
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + ": expected a non-negative integer");
    }
    return v.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::vector<ConditionKind> subset_field(const Json& j, const std::string& where) {
  try {
    if (j.is_string()) return parse_subset(j.get<std::string>());
    std::vector<ConditionKind> out;
    for (const auto& v : j) out.push_back(synth::parse_condition(v.get<std::string>()));
    if (out.empty()) throw std::invalid_argument("empty condition subset");
    return canonical_subset(out);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

Json subset_json(const std::vector<ConditionKind>& s) {
  Json a = Json::array();
  for (auto k : s) a.push_back(synth::condition_name(k));
  return a;
}

}  // namespace

std::filesystem::path RunConfig::default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("mosaic_out");
}

RunConfig run_config_from_json(const Json& j, RunConfig c) {
  require_keys(j, {"out_dir", "data", "model", "train", "checkpoint", "backbone", "resume", "sample", "trace_file"},
               "config");
  if (j.contains("out_dir")) c.out_dir = field<std::string>(j, "out_dir", "config");
  if (j.contains("checkpoint")) c.checkpoint = field<std::string>(j, "checkpoint", "config");
  if (j.contains("backbone")) c.backbone = field<std::string>(j, "backbone", "config");
  if (j.contains("resume")) c.resume = field<std::string>(j, "resume", "config");
  if (j.contains("trace_file")) c.trace_file = field<std::string>(j, "trace_file", "config");
  if (j.contains("data")) {
    const Json& d = j.at("data");
    require_keys(d, {"seed", "count", "dir"}, "data");
    if (d.contains("seed")) c.data_seed = field<std::uint64_t>(d, "seed", "data");
    if (d.contains("count")) c.data_count = field<std::size_t>(d, "count", "data");
    if (d.contains("dir")) c.data_dir = field<std::string>(d, "dir", "data");
  }
  if (j.contains("model")) c.model = pipeline::model_config_from_json(j.at("model"), c.model);
  if (j.contains("train")) c.train = pipeline::train_config_from_json(j.at("train"), c.train);
  if (j.contains("sample")) {
    const Json& s = j.at("sample");
    const std::string w = "sample";
    require_keys(s, {"count", "first", "seed", "steps", "conditions", "subsets", "mode", "trace", "fourier"}, w);
    if (s.contains("count")) c.sample_count = field<std::size_t>(s, "count", w);
    if (s.contains("first")) c.sample_first = field<std::size_t>(s, "first", w);
    if (s.contains("seed")) c.sample_seed = field<std::uint64_t>(s, "seed", w);
    if (s.contains("steps")) c.sample_steps = field<std::size_t>(s, "steps", w);
    if (s.contains("conditions")) c.conditions = subset_field(s.at("conditions"), w + ".conditions");
    if (s.contains("subsets")) {
      c.subsets.clear();
      if (!s.at("subsets").is_array()) throw ConfigError("sample.subsets: expected an array");
      for (const auto& v : s.at("subsets")) c.subsets.push_back(subset_field(v, w + ".subsets"));
    }
    if (s.contains("mode")) {
      try {
        c.mode = parse_mode(field<std::string>(s, "mode", w));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("sample.mode: ") + e.what());
      }
    }
    if (s.contains("trace")) c.trace = field<bool>(s, "trace", w);
    if (s.contains("fourier")) {
      if (s.at("fourier").is_null())
        c.fourier.reset();
      else
        c.fourier = pipeline::fourier_from_json(s.at("fourier"));
    }
  }
  if (c.sample_steps == 0) throw ConfigError("sample.steps: must be >= 1");
  return c;
}

Json to_json(const RunConfig& c) {
  Json subsets = Json::array();
  for (const auto& s : c.subsets) subsets.push_back(subset_json(s));
  Json sample = {{"count", c.sample_count},
                 {"first", c.sample_first},
                 {"seed", c.sample_seed},
                 {"steps", c.sample_steps},
                 {"conditions", subset_json(c.conditions)},
                 {"subsets", subsets},
                 {"mode", mode_name(c.mode)},
                 {"trace", c.trace}};
  sample["fourier"] = c.fourier ? pipeline::to_json(*c.fourier) : Json(nullptr);
  return {{"out_dir", c.out_dir.string()},
          {"data", {{"seed", c.data_seed}, {"count", c.data_count}, {"dir", c.data_dir.string()}}},
          {"model", pipeline::to_json(c.model)},
          {"train", pipeline::to_json(c.train)},
          {"checkpoint", c.checkpoint.string()},
          {"backbone", c.backbone.string()},
          {"resume", c.resume.string()},
          {"sample", sample},
          {"trace_file", c.trace_file.string()}};
}

}  // namespace mosaic::evalcli
