#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lwf/adam.hpp"
#include "lwf/dataset.hpp"
#include "lwf/metrics.hpp"
#include "lwf/model.hpp"
#include "lwf/stream.hpp"
#include "lwf/tensor.hpp"
#include "lwf/vocab.hpp"

namespace lwf {

// Logged decomposition of one training update. The combination identity
// l_tot == (1 - lambda) * l_new + lambda * l_reg holds exactly for the
// stored scalars.
struct LossBreakdown {
    double l_tot = 0.0;
    double l_new = 0.0;
    double l_reg = 0.0;
    double lambda = 0.0;
    uint64_t update_index = 0;
};

// Differentiable batch loss plus its scalar decomposition.
struct TotalLoss {
    Tensor node;  // scalar root for the backward pass
    LossBreakdown breakdown;
};

struct EarlyStopConfig {
    int patience = 10;                   // epochs without improvement
    std::string monitor = "val_spider";  // metric watched for improvement

    bool operator==(const EarlyStopConfig&) const = default;
    void validate() const;
};

struct PretrainConfig {
    AdamConfig adam;
    EarlyStopConfig stop;
    int batch_size = 4;
    int max_epochs = 300;
    uint64_t shuffle_seed = 1;

    bool operator==(const PretrainConfig&) const = default;
    void validate() const;
};

struct PretrainLogEntry {
    int epoch = 0;  // 0-based
    double train_ce = 0.0;
    double val_spider = 0.0;
    bool improved = false;
};

struct PretrainResult {
    std::vector<PretrainLogEntry> log;
    int best_epoch = -1;
    double best_val_spider = 0.0;
    int epochs_run = 0;
    bool stopped_early = false;
};

// Mean of scalar loss nodes, accumulated left to right. Shared by the
// trainer and by reference paths in tests so means round identically.
Tensor batch_mean(const std::vector<Tensor>& scalars);

// Teacher-forced cross-entropy of one padded batch: per example, feed
// tokens[0..n-2], score tokens[1..n-1] at temperature 1, then average.
Tensor batch_cross_entropy(const Model& model, const Batch& batch);

// Caption fitting with Adam: per epoch, minimize mean CE over shuffled
// train batches, evaluate SPIDEr on the validation clips, keep the
// best-epoch parameters, and stop after `patience` epochs without
// improvement. The model holds the best parameters on return. A
// non-finite loss aborts with a diagnostic.
PretrainResult pretrain(Model& model, const std::vector<TrainExample>& train_examples,
                        const std::vector<CaptionedClip>& val_clips, const Vocabulary& vocab,
                        const PretrainConfig& cfg);

// The one-time copy that seeds the student from the trained base model.
Model clone_model(const Model& base);

// Combines per-example losses: l_new is the batch-mean cross-entropy of
// the temperature-1 rows, l_reg the batch-mean KL of teacher rows against
// student rows (both at the distillation temperature). At lambda == 0 the
// regularizer is skipped entirely and l_tot aliases the l_new node; at
// lambda == 1 it aliases l_reg, so the endpoints are exact.
TotalLoss total_loss(const std::vector<std::vector<int>>& targets,
                     const std::vector<Tensor>& probs_new_t1,
                     const std::vector<Tensor>& probs_new_td,
                     const std::vector<Tensor>& probs_base_td, double lambda,
                     const std::vector<std::vector<uint8_t>>& masks = {});

struct ContinualRunConfig {
    double lambda = 0.85;
    int batch_size = 4;
    double distill_temperature = 2.0;
    std::vector<uint64_t> checkpoint_updates = {50, 75, 150};
    bool eval_at_end = true;
    AdamConfig adam;
    uint64_t shuffle_seed = 0;

    bool operator==(const ContinualRunConfig&) const = default;
    void validate() const;  // lambda in [0,1], checkpoints strictly increasing
};

// One stream update: teacher-forced forwards of both models on the same
// batch inputs, backward through the student only, one Adam step. The
// teacher runs without gradient tracking and is never mutated. A
// non-finite loss aborts with a batch diagnostic.
LossBreakdown continual_step(const Model& m_base, Model& m_new, const Batch& batch,
                             const ContinualRunConfig& cfg, AdamState& adam_state);

struct CheckpointSnapshot {
    uint64_t update_index = 0;
    std::vector<std::pair<std::string, std::vector<double>>> params;  // student values
    EvalReport eval_ori;
    EvalReport eval_new;
};

struct ContinualRunResult {
    std::vector<LossBreakdown> loss_trace;  // one entry per stream batch
    std::vector<CheckpointSnapshot> checkpoints;
    uint64_t teacher_hash_before = 0;
    uint64_t teacher_hash_after = 0;  // verified equal before returning
};

// Single pass over the new-data stream with a fresh Adam state. At each
// configured update index (indices beyond the stream are skipped) and at
// the stream end, snapshots the student and evaluates it on both held-out
// splits ("ori" and "new"); the end snapshot is skipped when it would
// duplicate the last configured one.
ContinualRunResult continual_run(const Model& m_base, Model& m_new,
                                 const std::vector<TrainExample>& new_examples,
                                 const Vocabulary& vocab,
                                 const std::vector<CaptionedClip>& eval_ori_clips,
                                 const std::vector<CaptionedClip>& eval_new_clips,
                                 const ContinualRunConfig& cfg);

}  // namespace lwf
