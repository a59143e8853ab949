#pragma once

// Deterministic demo dataset: a three tier profile with well separated speed
// classes, cheap relocation, and the scales the demo pipeline evaluates.

#include <vector>

#include "tierplan/storage_profile.hpp"
#include "tierplan/workflow.hpp"

namespace tierplan {

storage_profile demo_profile();

// Primary scale the region mining demo runs at.
scale_point demo_scale();

// Node-count sweep used by the capacity query demo.
std::vector<scale_point> demo_scales();

} // namespace tierplan
