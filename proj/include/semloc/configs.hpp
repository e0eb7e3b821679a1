#pragma once

#include <set>
#include <string>

#include "semloc/contrastive.hpp"
#include "semloc/kvconfig.hpp"
#include "semloc/synth.hpp"

namespace semloc {

/// Keys understood by train_config_from().
const std::set<std::string>& train_config_keys();
/// Keys understood by scene_spec_from().
const std::set<std::string>& scene_spec_keys();

/// Starts from `base` and overrides every key present. Unknown keys are not checked here.
TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig base = {});
SceneSpec scene_spec_from(const KeyValueConfig& kv, SceneSpec base = {});

}  // namespace semloc
