#pragma once

#include <filesystem>
#include <string>

#include "stopnav/numeric/param_store.hpp"

namespace stopnav::numeric {

inline constexpr int kCheckpointFormatVersion = 1;

/// JSON text: {"format_version", "step", "parameters": [{"name", "shape",
/// "value", "first_moment", "second_moment"}]}. Doubles are written in
/// shortest round-trip form, so load(save(p)) == p exactly.
std::string save_checkpoint(const ParamStore& params);
ParamStore load_checkpoint(const std::string& document);

void write_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore read_checkpoint(const std::filesystem::path& path);

}  // namespace stopnav::numeric
