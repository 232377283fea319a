#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "qamatch/numerics.hpp"

namespace qamatch {

// Binary model layout, all integers and floats little-endian:
//   bytes 0..3   magic "QAM1"
//   uint32       number of layer dimensions L (>= 2)
//   uint32 x L   layer dimensions d_in, hidden..., C
//   per layer    weights (out x in, row-major) then bias (out), float64

std::vector<std::uint8_t> serialize_model(const MlpClassifier& model);
/// Throws FormatError on bad magic, truncated or oversized input.
MlpClassifier deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const MlpClassifier& model, const std::filesystem::path& path);
MlpClassifier load_model(const std::filesystem::path& path);

}  // namespace qamatch
