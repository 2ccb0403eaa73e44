#pragma once

#include <string>
#include <vector>

#include "decoupler/optimize.hpp"

namespace decoupler {

struct TraceGroup {
  std::string label;
  std::vector<TrainingTrace> traces;
};

/// Iteration against 1 - fidelity on a log axis: median line and
/// interquartile band per group, dashed markers at the median iteration of
/// each phase switch.
std::string render_training_svg(const std::vector<TraceGroup>& groups, const std::string& title);

}  // namespace decoupler
