#pragma once

#include <string>
#include <vector>

#include "viewgrid/tape.hpp"

namespace viewgrid {

// Binary weight file: "VGRD" magic, u32 version, u32 tensor count, then per
// tensor (name_len u32, name bytes, rank u32, dims u64..., values f64 LE).
// Values round-trip bit-exactly.
void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params);

// Loads into an existing parameter set; every name and shape must match the
// file exactly (and vice versa), otherwise throws std::runtime_error.
void load_checkpoint(const std::string& path, std::vector<Parameter*>& params);

}  // namespace viewgrid
