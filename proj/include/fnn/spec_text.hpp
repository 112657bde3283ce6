#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fnn/network.hpp"

namespace fnn {

/// Parses a semicolon-separated layer chain such as
/// "klconv v=32 r=3 s=3 mode=m link=spherical; lnorm; lpool r=2 s=2".
/// Throws ConfigError on unknown kinds, keys or malformed values.
std::vector<LayerSpec> parse_layers(std::string_view text);

/// Canonical descriptor string; parse_layers(format_layers(x)) == x.
std::string format_layers(const std::vector<LayerSpec>& layers);

/// Self-contained text form of a NetworkSpec, as stored in checkpoints.
std::string serialize_spec(const NetworkSpec& spec);
NetworkSpec parse_spec(std::string_view text);

}  // namespace fnn
