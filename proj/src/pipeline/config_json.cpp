#include "mosaic/pipeline/config_json.hpp"

#include <algorithm>
#include <cstring>
#include <type_traits>

namespace mosaic::pipeline {
namespace {

template <typename T>
void read_field(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    const Json& v = j.at(key);
    if (!v.is_number_unsigned())
      throw ConfigError(where + "." + key + ": expected a non-negative integer");
  }
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                [&](const char* a) { return key == a; });
    if (!ok) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

Json to_json(const ModelConfig& c) {
  return {{"d", c.d},
          {"heads", c.heads},
          {"ff_mult", c.ff_mult},
          {"patch", c.patch},
          {"double_blocks", c.double_blocks},
          {"single_blocks", c.single_blocks},
          {"n_p", c.n_p},
          {"init_seed", c.init_seed}};
}

Json to_json(const FourierOptions& f) { return {{"alpha", f.alpha}, {"cutoff", f.cutoff}}; }

Json to_json(const TrainConfig& c) {
  Json j = {{"phase", phase_name(c.phase)},
            {"lr", c.lr},
            {"batch", c.batch},
            {"steps", c.steps},
            {"seed", c.seed},
            {"condition_dropout", c.condition_dropout},
            {"checkpoint_every", c.checkpoint_every}};
  j["fourier"] = c.fourier ? to_json(*c.fourier) : Json(nullptr);
  return j;
}

ModelConfig model_config_from_json(const Json& j, ModelConfig c) {
  const std::string w = "model";
  require_keys(j, {"d", "heads", "ff_mult", "patch", "double_blocks", "single_blocks", "n_p", "init_seed"}, w);
  read_field(j, "d", c.d, w);
  read_field(j, "heads", c.heads, w);
  read_field(j, "ff_mult", c.ff_mult, w);
  read_field(j, "patch", c.patch, w);
  read_field(j, "double_blocks", c.double_blocks, w);
  read_field(j, "single_blocks", c.single_blocks, w);
  read_field(j, "n_p", c.n_p, w);
  read_field(j, "init_seed", c.init_seed, w);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return c;
}

FourierOptions fourier_from_json(const Json& j) {
  FourierOptions f;
  require_keys(j, {"alpha", "cutoff"}, "fourier");
  read_field(j, "alpha", f.alpha, "fourier");
  read_field(j, "cutoff", f.cutoff, "fourier");
  return f;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  const std::string w = "train";
  require_keys(j, {"phase", "lr", "batch", "steps", "seed", "condition_dropout", "fourier", "checkpoint_every"}, w);
  if (j.contains("phase")) {
    try {
      c.phase = parse_phase(j.at("phase").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(w + ".phase: " + e.what());
    }
  }
  read_field(j, "lr", c.lr, w);
  read_field(j, "batch", c.batch, w);
  read_field(j, "steps", c.steps, w);
  read_field(j, "seed", c.seed, w);
  read_field(j, "condition_dropout", c.condition_dropout, w);
  read_field(j, "checkpoint_every", c.checkpoint_every, w);
  if (j.contains("fourier")) {
    if (j.at("fourier").is_null())
      c.fourier.reset();
    else
      c.fourier = fourier_from_json(j.at("fourier"));
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return c;
}

}  // namespace mosaic::pipeline
