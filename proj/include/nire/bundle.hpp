#pragma once

#include <string>

#include "nire/task.hpp"

namespace nire {

/// A task sample on disk: `manifest.json`, 16-bit PGM/PPM frames, and an NREV
/// event file in one directory.
void write_bundle(const std::string& dir, const sim::TaskSample& sample);
/// Throws FormatError for a missing or malformed manifest.
sim::TaskSample read_bundle(const std::string& dir);

}  // namespace nire
