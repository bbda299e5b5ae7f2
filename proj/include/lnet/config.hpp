#pragma once

#include <string>

#include "lnet/model.hpp"
#include "lnet/train.hpp"

namespace lnet {

// On-disk run configuration. The JSON schema is versioned (current: 1) and
// documented in the README; every field has a default and may be omitted.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string vocab = "extended";  // qm9 | dipole | carbon | extended
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& cfg);

ElementVocab vocab_by_name(const std::string& name);

}  // namespace lnet
