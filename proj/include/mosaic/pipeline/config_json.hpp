#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "mosaic/pipeline/train.hpp"

namespace mosaic::pipeline {

using Json = nlohmann::json;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Throws ConfigError if `j` is not an object or has a key outside `allowed`.
void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json to_json(const ModelConfig& c);
Json to_json(const FourierOptions& f);
Json to_json(const TrainConfig& c);

// Missing keys keep the defaults of `base`; unknown keys are rejected.
ModelConfig model_config_from_json(const Json& j, ModelConfig base = {});
FourierOptions fourier_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

}  // namespace mosaic::pipeline
