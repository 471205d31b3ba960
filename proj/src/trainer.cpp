#include "lwf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lwf/error.hpp"
#include "lwf/losses.hpp"
#include "lwf/ops.hpp"
#include "lwf/rng.hpp"

namespace lwf {

namespace {

// Splits an encoded caption (start ... end) into decoder input and
// next-token targets.
void split_teacher_forcing(const std::vector<int>& tokens, std::vector<int>& y_in,
                           std::vector<int>& targets) {
    if (tokens.size() < 2) {
        throw DataError("caption with " + std::to_string(tokens.size()) +
                        " tokens cannot be teacher-forced (needs start + end)");
    }
    y_in.assign(tokens.begin(), tokens.end() - 1);
    targets.assign(tokens.begin() + 1, tokens.end());
}

std::string batch_diagnostic(const Batch& batch) {
    std::ostringstream out;
    for (int i = 0; i < batch.size(); ++i) {
        if (i > 0) out << ", ";
        out << batch.clip_ids[static_cast<size_t>(i)];
    }
    return out.str();
}

}  // namespace

void EarlyStopConfig::validate() const {
    if (patience < 1) {
        throw ConfigError("early-stop patience must be >= 1, got " + std::to_string(patience));
    }
}

void PretrainConfig::validate() const {
    adam.validate();
    stop.validate();
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
    }
    if (max_epochs < 1) {
        throw ConfigError("max_epochs must be >= 1, got " + std::to_string(max_epochs));
    }
}

void ContinualRunConfig::validate() const {
    adam.validate();
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
    }
    if (!(distill_temperature > 0.0)) {
        throw ConfigError("distill_temperature must be positive, got " +
                          std::to_string(distill_temperature));
    }
    for (size_t i = 0; i + 1 < checkpoint_updates.size(); ++i) {
        if (checkpoint_updates[i + 1] <= checkpoint_updates[i]) {
            throw ConfigError("checkpoint_updates must be strictly increasing");
        }
    }
    if (!checkpoint_updates.empty() && checkpoint_updates.front() < 1) {
        throw ConfigError("checkpoint_updates are 1-based update counts");
    }
}

Tensor batch_mean(const std::vector<Tensor>& scalars) {
    if (scalars.empty()) throw DataError("mean of zero losses");
    Tensor acc = scalars[0];
    for (size_t i = 1; i < scalars.size(); ++i) acc = add(acc, scalars[i]);
    return scale(acc, 1.0 / static_cast<double>(scalars.size()));
}

Tensor batch_cross_entropy(const Model& model, const Batch& batch) {
    if (batch.size() == 0) throw DataError("empty batch");
    std::vector<Tensor> losses;
    losses.reserve(static_cast<size_t>(batch.size()));
    for (int i = 0; i < batch.size(); ++i) {
        std::vector<int> y_in, targets;
        split_teacher_forcing(batch.example_tokens(i), y_in, targets);
        const Tensor x = batch.example_features(i);
        const Tensor probs = softmax_t(model.decode(model.encode(x), y_in), 1.0);
        losses.push_back(cross_entropy_indices(targets, probs));
    }
    return batch_mean(losses);
}

PretrainResult pretrain(Model& model, const std::vector<TrainExample>& train_examples,
                        const std::vector<CaptionedClip>& val_clips, const Vocabulary& vocab,
                        const PretrainConfig& cfg) {
    cfg.validate();
    if (train_examples.empty()) throw DataError("pretrain: no training examples");
    if (model.config().vocab_size != vocab.size()) {
        throw VocabError("pretrain: model expects " + std::to_string(model.config().vocab_size) +
                         " tokens but vocabulary has " + std::to_string(vocab.size()));
    }

    AdamState adam_state = AdamState::init(model.params());

    PretrainResult result;
    std::vector<std::pair<std::string, std::vector<double>>> best_params;
    double best = -std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        StreamConfig stream_cfg;
        stream_cfg.batch_size = cfg.batch_size;
        stream_cfg.shuffle_seed = mix_seed(cfg.shuffle_seed, static_cast<uint64_t>(epoch));
        const std::vector<Batch> batches = stream_batches(train_examples, stream_cfg);

        double ce_sum = 0.0;
        for (size_t b = 0; b < batches.size(); ++b) {
            model.zero_grad();
            const Tensor loss = batch_cross_entropy(model, batches[b]);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw NumericError("pretrain diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b) + " (loss = " +
                                   std::to_string(value) + "; clips: " +
                                   batch_diagnostic(batches[b]) + ")");
            }
            backward(loss);
            adam_step(model.params(), adam_state, cfg.adam);
            ce_sum += value;
        }

        PretrainLogEntry entry;
        entry.epoch = epoch;
        entry.train_ce = ce_sum / static_cast<double>(batches.size());
        entry.val_spider =
            evaluate_dataset(model, val_clips, vocab, "val", nullptr,
                             static_cast<uint64_t>(epoch))
                .spider;
        entry.improved = entry.val_spider > best;
        result.log.push_back(entry);

        if (entry.improved) {
            best = entry.val_spider;
            result.best_epoch = epoch;
            best_params = model.dump_param_values();
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
            if (epochs_since_improvement >= cfg.stop.patience) {
                result.stopped_early = true;
                break;
            }
        }
    }

    model.load_param_values(best_params);
    result.best_val_spider = best;
    result.epochs_run = static_cast<int>(result.log.size());
    return result;
}

Model clone_model(const Model& base) { return base.clone(); }

TotalLoss total_loss(const std::vector<std::vector<int>>& targets,
                     const std::vector<Tensor>& probs_new_t1,
                     const std::vector<Tensor>& probs_new_td,
                     const std::vector<Tensor>& probs_base_td, double lambda,
                     const std::vector<std::vector<uint8_t>>& masks) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
    }
    const size_t n = targets.size();
    if (n == 0) throw DataError("total_loss: empty batch");
    if (probs_new_t1.size() != n) {
        throw ShapeError("total_loss: " + std::to_string(n) + " target lists vs " +
                         std::to_string(probs_new_t1.size()) + " temperature-1 rows");
    }
    if (!masks.empty() && masks.size() != n) {
        throw ShapeError("total_loss: mask count mismatch");
    }
    const bool distill = lambda > 0.0;
    if (distill &&
        (probs_new_td.size() != n || probs_base_td.size() != n)) {
        throw ShapeError("total_loss: distillation rows missing for lambda > 0");
    }

    auto mask_of = [&](size_t i) -> const std::vector<uint8_t>& {
        static const std::vector<uint8_t> kNone;
        return masks.empty() ? kNone : masks[i];
    };

    std::vector<Tensor> ce_terms;
    ce_terms.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        ce_terms.push_back(cross_entropy_indices(targets[i], probs_new_t1[i], mask_of(i)));
    }
    const Tensor l_new = batch_mean(ce_terms);

    TotalLoss out;
    out.breakdown.lambda = lambda;
    out.breakdown.l_new = l_new.item();

    if (!distill) {
        // Pure fine-tuning: the returned node IS the cross-entropy node,
        // so this path is bitwise identical to a loop with no teacher.
        out.node = l_new;
        out.breakdown.l_reg = 0.0;
        out.breakdown.l_tot = out.node.item();
        return out;
    }

    std::vector<Tensor> kl_terms;
    kl_terms.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        kl_terms.push_back(kl_divergence(probs_base_td[i], probs_new_td[i], mask_of(i)));
    }
    const Tensor l_reg = batch_mean(kl_terms);
    out.breakdown.l_reg = l_reg.item();

    if (lambda == 1.0) {
        // The new-data term is logged but contributes no gradient.
        out.node = l_reg;
    } else {
        out.node = add(scale(l_new, 1.0 - lambda), scale(l_reg, lambda));
    }
    out.breakdown.l_tot = out.node.item();
    return out;
}

LossBreakdown continual_step(const Model& m_base, Model& m_new, const Batch& batch,
                             const ContinualRunConfig& cfg, AdamState& adam_state) {
    cfg.validate();
    if (batch.size() == 0) throw DataError("continual step: empty batch");
    if (!(m_base.config() == m_new.config())) {
        throw ConfigError("continual step: teacher and student configs differ");
    }

    TotalLoss loss;
    if (cfg.lambda == 0.0) {
        // Exactly the fine-tuning graph; the teacher is never consulted.
        loss.node = batch_cross_entropy(m_new, batch);
        loss.breakdown.lambda = 0.0;
        loss.breakdown.l_new = loss.node.item();
        loss.breakdown.l_reg = 0.0;
        loss.breakdown.l_tot = loss.breakdown.l_new;
    } else {
        const size_t n = static_cast<size_t>(batch.size());
        std::vector<std::vector<int>> targets(n);
        std::vector<Tensor> probs_new_t1(n), probs_new_td(n), probs_base_td(n);
        for (size_t i = 0; i < n; ++i) {
            std::vector<int> y_in;
            split_teacher_forcing(batch.example_tokens(static_cast<int>(i)), y_in, targets[i]);
            const Tensor x = batch.example_features(static_cast<int>(i));

            const Tensor logits_new = m_new.decode(m_new.encode(x), y_in);
            probs_new_t1[i] = softmax_t(logits_new, 1.0);
            probs_new_td[i] = softmax_t(logits_new, cfg.distill_temperature);
            {
                // Same teacher-forced inputs, no gradient tracking.
                NoGradGuard guard;
                const Tensor logits_base = m_base.decode(m_base.encode(x), y_in);
                probs_base_td[i] = softmax_t(logits_base, cfg.distill_temperature);
            }
        }
        loss = total_loss(targets, probs_new_t1, probs_new_td, probs_base_td, cfg.lambda);
    }

    if (!std::isfinite(loss.breakdown.l_tot)) {
        throw NumericError("continual step " + std::to_string(adam_state.t + 1) +
                           ": non-finite loss " + std::to_string(loss.breakdown.l_tot) +
                           " (clips: " + batch_diagnostic(batch) + ")");
    }

    m_new.zero_grad();
    backward(loss.node);
    adam_step(m_new.params(), adam_state, cfg.adam);
    loss.breakdown.update_index = adam_state.t;
    return loss.breakdown;
}

ContinualRunResult continual_run(const Model& m_base, Model& m_new,
                                 const std::vector<TrainExample>& new_examples,
                                 const Vocabulary& vocab,
                                 const std::vector<CaptionedClip>& eval_ori_clips,
                                 const std::vector<CaptionedClip>& eval_new_clips,
                                 const ContinualRunConfig& cfg) {
    cfg.validate();
    if (new_examples.empty()) throw DataError("continual run: empty stream");

    ContinualRunResult result;
    result.teacher_hash_before = m_base.param_hash();

    StreamConfig stream_cfg;
    stream_cfg.batch_size = cfg.batch_size;
    stream_cfg.shuffle_seed = cfg.shuffle_seed;
    stream_cfg.single_pass = true;
    const std::vector<Batch> batches = stream_batches(new_examples, stream_cfg);

    // Fresh optimizer moments: the stream phase does not inherit
    // pre-training state.
    AdamState adam_state = AdamState::init(m_new.params());

    auto snapshot = [&](uint64_t update_index) {
        CheckpointSnapshot snap;
        snap.update_index = update_index;
        snap.params = m_new.dump_param_values();
        snap.eval_ori = evaluate_dataset(m_new, eval_ori_clips, vocab, "ori", nullptr,
                                         update_index);
        snap.eval_new = evaluate_dataset(m_new, eval_new_clips, vocab, "new", nullptr,
                                         update_index);
        result.checkpoints.push_back(std::move(snap));
    };

    size_t next_checkpoint = 0;
    for (const Batch& batch : batches) {
        const LossBreakdown breakdown =
            continual_step(m_base, m_new, batch, cfg, adam_state);
        result.loss_trace.push_back(breakdown);
        if (next_checkpoint < cfg.checkpoint_updates.size() &&
            breakdown.update_index == cfg.checkpoint_updates[next_checkpoint]) {
            snapshot(breakdown.update_index);
            ++next_checkpoint;
        }
    }

    const uint64_t total_updates = adam_state.t;
    if (cfg.eval_at_end &&
        (result.checkpoints.empty() ||
         result.checkpoints.back().update_index != total_updates)) {
        snapshot(total_updates);
    }

    result.teacher_hash_after = m_base.param_hash();
    if (result.teacher_hash_after != result.teacher_hash_before) {
        throw Error("continual run mutated the frozen base model");
    }
    return result;
}

}  // namespace lwf
