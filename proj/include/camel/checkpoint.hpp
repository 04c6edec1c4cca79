#pragma once

#include <string>

#include "camel/harness.hpp"

namespace camel {

// Self-describing text dump of the full run state: every parameter matrix,
// pool composition, frozen flags, utilization stats, optimizer moments,
// detector references and tuner histories. Values are written as hex floats,
// so save -> load round-trips bit-exactly and a resumed run replays the
// original one.
void save_checkpoint(const std::string& path, Runner& runner);

// Restores into a Runner built from the same config.
void load_checkpoint(const std::string& path, Runner& runner);

}  // namespace camel
