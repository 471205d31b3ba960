#pragma once

#include <cstdint>
#include <vector>

#include "lwf/dataset.hpp"
#include "lwf/tensor.hpp"

namespace lwf {

// Single-pass batch sampling over the new-data stream: shuffle once by
// seed, then walk the order in consecutive slices of B.
struct StreamConfig {
    int batch_size = 4;
    uint64_t shuffle_seed = 0;
    bool single_pass = true;

    void validate() const;
};

// Padded batch container. Padding is a storage convention only: consumers
// slice real extents back out via feature_lengths / token_mask, so batch
// losses are exact means of per-example losses.
struct Batch {
    Tensor features;                        // [B, T_max, F], zero-padded
    std::vector<int> feature_lengths;       // true T_a per example
    std::vector<std::vector<int>> token_targets;  // B x T_w_max, pad-filled
    std::vector<std::vector<uint8_t>> token_mask;  // 1 inside real extent
    std::vector<std::string> clip_ids;

    int size() const { return static_cast<int>(feature_lengths.size()); }
    // The example's features without padding, as a fresh [T, F] tensor.
    Tensor example_features(int i) const;
    // The example's token sequence without padding.
    std::vector<int> example_tokens(int i) const;
};

Batch pad_batch(const std::vector<TrainExample>& examples);

// Shuffles by cfg.shuffle_seed and partitions into batches of B (last one
// may be smaller). Every example appears exactly once per pass.
std::vector<Batch> stream_batches(const std::vector<TrainExample>& dataset,
                                  const StreamConfig& cfg);

// ceil(n / B): the number of updates a single pass performs.
size_t num_batches(size_t n_examples, int batch_size);

}  // namespace lwf
