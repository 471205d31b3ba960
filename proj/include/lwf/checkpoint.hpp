#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lwf/model.hpp"

namespace lwf {

// Model persistence. File layout, all integers little-endian:
//
//   magic "LWFC" | u32 format version | u64 update_index
//   u64 config length | UTF-8 config text
//   u32 record count
//   per record: u32 name length | UTF-8 name | u32 rank | u32 dims[rank]
//               | 32-bit floats, row-major
//   u8 optimizer flag | if 1: u64 step count, then per record the first-
//               and second-moment arrays as 64-bit floats
//
// Parameter values are stored at 32-bit precision and re-embedded exactly
// on load, so save -> load -> save reproduces identical bytes and a frozen
// model's hash survives a round trip. Optimizer moments keep full 64-bit
// precision. A version other than kCheckpointVersion is rejected.

inline constexpr uint32_t kCheckpointVersion = 1;

struct ParamRecord {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;  // quantized to 32-bit on save
};

struct OptimizerRecord {
    uint64_t t = 0;
    std::vector<std::vector<double>> m;  // parallel to the parameter records
    std::vector<std::vector<double>> v;
};

struct Checkpoint {
    uint32_t version = kCheckpointVersion;
    uint64_t update_index = 0;
    std::string config_text;
    std::vector<ParamRecord> params;
    std::optional<OptimizerRecord> optimizer;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Snapshot of a model's current parameters plus the run configuration
// text that rebuilds its architecture.
Checkpoint checkpoint_from_model(const Model& model, const std::string& config_text,
                                 uint64_t update_index);

// Writes the checkpoint's values into an existing model. The record set
// must cover the model's parameters exactly, with matching shapes.
void apply_checkpoint(const Checkpoint& ckpt, Model& model);

}  // namespace lwf
