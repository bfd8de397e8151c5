#pragma once

#include "atlab/network.hpp"

#include <string>

namespace atlab {

// Checkpoint container: magic "ATLB", format version u16, length-prefixed
// ASCII architecture string, then per-parameter little-endian float32 blobs in
// layer order (weight then bias). Parameters are held in float64 at runtime,
// so a save quantizes to float32; any model loaded from a checkpoint then
// round-trips bitwise.
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_model(const NetworkModel& model, const std::string& path);
NetworkModel load_model(const std::string& path);

}  // namespace atlab
