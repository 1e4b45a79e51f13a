#pragma once

#include <string>

#include "contbench/nn.hpp"
#include "contbench/strategies.hpp"

namespace contbench {

/// Binary snapshot of a model plus its strategy memory (anchors, basis,
/// replay buffer). Reload followed by save reproduces the file bitwise.
void save_checkpoint(const MlpModel& model, const Strategy& strategy, const std::string& path);

struct LoadedCheckpoint {
    MlpModel model;
    Strategy strategy;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace contbench
