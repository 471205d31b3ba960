#include "lwf/stream.hpp"

#include <algorithm>
#include <numeric>

#include "lwf/error.hpp"
#include "lwf/rng.hpp"

namespace lwf {

void StreamConfig::validate() const {
    if (batch_size < 1) throw ConfigError("stream: batch_size must be >= 1");
}

Tensor Batch::example_features(int i) const {
    const int t = feature_lengths[static_cast<size_t>(i)];
    const int f = features.dim(2);
    const int t_max = features.dim(1);
    std::vector<double> v(static_cast<size_t>(t) * f);
    const auto src = features.data();
    const size_t base = static_cast<size_t>(i) * t_max * f;
    std::copy_n(src.begin() + static_cast<long>(base), v.size(), v.begin());
    return Tensor({t, f}, std::move(v));
}

std::vector<int> Batch::example_tokens(int i) const {
    const auto& row = token_targets[static_cast<size_t>(i)];
    const auto& mask = token_mask[static_cast<size_t>(i)];
    std::vector<int> out;
    for (size_t j = 0; j < row.size(); ++j) {
        if (mask[j]) out.push_back(row[j]);
    }
    return out;
}

Batch pad_batch(const std::vector<TrainExample>& examples) {
    if (examples.empty()) throw DataError("pad_batch: empty batch");
    const int b = static_cast<int>(examples.size());
    int t_max = 0, tw_max = 0;
    const int f = examples[0].features.dim(1);
    for (const auto& ex : examples) {
        if (ex.features.rank() != 2 || ex.features.dim(1) != f) {
            throw ShapeError("pad_batch: inconsistent feature dimension");
        }
        t_max = std::max(t_max, ex.features.dim(0));
        tw_max = std::max(tw_max, static_cast<int>(ex.tokens.size()));
    }
    Batch batch;
    std::vector<double> feat(static_cast<size_t>(b) * t_max * f, 0.0);
    for (int i = 0; i < b; ++i) {
        const auto& ex = examples[static_cast<size_t>(i)];
        const int t = ex.features.dim(0);
        const auto src = ex.features.data();
        std::copy_n(src.begin(), static_cast<size_t>(t) * f,
                    feat.begin() + static_cast<long>(i) * t_max * f);
        batch.feature_lengths.push_back(t);

        std::vector<int> row(static_cast<size_t>(tw_max), 0);  // pad token = 0
        std::vector<uint8_t> mask(static_cast<size_t>(tw_max), 0);
        for (size_t j = 0; j < ex.tokens.size(); ++j) {
            row[j] = ex.tokens[j];
            mask[j] = 1;
        }
        batch.token_targets.push_back(std::move(row));
        batch.token_mask.push_back(std::move(mask));
        batch.clip_ids.push_back(ex.clip_id);
    }
    batch.features = Tensor({b, t_max, f}, std::move(feat));
    return batch;
}

std::vector<Batch> stream_batches(const std::vector<TrainExample>& dataset,
                                  const StreamConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw DataError("stream_batches: empty dataset");
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.shuffle_seed);
    rng.shuffle(order);

    std::vector<Batch> batches;
    batches.reserve(num_batches(dataset.size(), cfg.batch_size));
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
        const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
        std::vector<TrainExample> slice;
        slice.reserve(end - start);
        for (size_t i = start; i < end; ++i) slice.push_back(dataset[order[i]]);
        batches.push_back(pad_batch(slice));
    }
    return batches;
}

size_t num_batches(size_t n_examples, int batch_size) {
    return (n_examples + static_cast<size_t>(batch_size) - 1) /
           static_cast<size_t>(batch_size);
}

}  // namespace lwf
