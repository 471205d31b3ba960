#pragma once

#include <string>

#include "lwf/tensor.hpp"

namespace lwf {

// Audio features travel as [T_a, F] tensors (64-bit in memory); files
// store 32-bit floats, so a save truncates precision and a load embeds
// the stored 32-bit values exactly.
//
// File layout: magic "AFB1", little-endian u32 T_a, u32 F, then
// T_a * F little-endian 32-bit floats, row-major.

void save_features(const Tensor& features, const std::string& path);
Tensor load_features(const std::string& path);

// Rounds every element to 32-bit precision in place semantics (returns a
// new tensor); save(load(x)) == save(x) byte-wise for any x.
Tensor quantize_f32(const Tensor& t);

}  // namespace lwf
