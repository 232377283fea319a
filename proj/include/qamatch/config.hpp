#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qamatch/data.hpp"
#include "qamatch/trainer.hpp"

namespace qamatch {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Flat "key = value" text. Blank lines and lines starting with '#' are
/// ignored. Malformed lines and repeated keys raise ParameterError with the
/// line number.
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

/// Sets one field; unknown keys and unparsable values raise ParameterError
/// naming the key.
void set_option(TrainConfig& cfg, std::string_view key, std::string_view value);
void set_option(SynthConfig& cfg, std::string_view key, std::string_view value);

/// Every field with its current value, in the documented key order.
KeyValues entries(const TrainConfig& cfg);
KeyValues entries(const SynthConfig& cfg);

/// Applies the entries in order. For SynthConfig a "preset" entry is applied
/// before all others regardless of its position.
void apply(TrainConfig& cfg, const KeyValues& kv);
void apply(SynthConfig& cfg, const KeyValues& kv);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace qamatch
