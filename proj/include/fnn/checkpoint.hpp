#pragma once

#include <filesystem>
#include <iosfwd>

#include "fnn/network.hpp"

namespace fnn {

/// Checkpoint container, all integers and floats little-endian:
///
///   "FSD1"                       magic and format version
///   u32 n, n bytes               serialize_spec() text
///   u64                          epoch
///   4 x u64                      RNG state
///   f64                          learning rate
///   u32 k                        number of seed arrays (2 per parameterized layer)
///   k x (u64 count, count x f64) filter seeds then bias seeds, layer by layer
void save_checkpoint(const TrainState& state, std::ostream& out);
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);

/// Throws FormatError on a wrong magic, truncation, or arrays that do not fit the spec.
TrainState load_checkpoint(std::istream& in);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace fnn
