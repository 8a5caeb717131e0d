#pragma once

#include <filesystem>

#include "decsal/model.hpp"

namespace decsal {

// Single file: one-line JSON header (config plus a weight manifest with
// shapes and byte offsets) followed by a little-endian float64 payload.
// Round-trips bit-exactly.
void save_checkpoint(const Model& m, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace decsal
