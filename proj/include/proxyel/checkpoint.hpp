#pragma once

#include <filesystem>

#include "proxyel/encoder.hpp"

namespace proxyel {

/// Binary checkpoint: magic "PXELCKPT", format version, dimensions,
/// similarity kind, then every tensor of the mention tower followed by the
/// entity tower (row-major f64, little-endian).
void save_checkpoint(const std::filesystem::path& path, const BiEncoder& model);
BiEncoder load_checkpoint(const std::filesystem::path& path);

}  // namespace proxyel
