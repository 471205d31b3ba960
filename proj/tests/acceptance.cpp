// Acceptance gate for the continual-captioning workbench. Each criterion
// prints exactly one [PASS]/[FAIL] line with its key measurements; the
// process exits non-zero if any criterion fails. Criteria are
// property-based (gradients, loss algebra, metric oracle, stream
// coverage, reproducibility) plus directional desk-scale experiments
// (overfit probe, retention/adaptation trade-off).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lwf/adam.hpp"
#include "lwf/cli.hpp"
#include "lwf/dataset.hpp"
#include "lwf/error.hpp"
#include "lwf/finite_diff.hpp"
#include "lwf/losses.hpp"
#include "lwf/metrics.hpp"
#include "lwf/model.hpp"
#include "lwf/ops.hpp"
#include "lwf/rng.hpp"
#include "lwf/runconfig.hpp"
#include "lwf/stream.hpp"
#include "lwf/synth.hpp"
#include "lwf/tensor.hpp"
#include "lwf/trainer.hpp"
#include "lwf/vocab.hpp"

namespace fs = std::filesystem;
using namespace lwf;

namespace {

// ---------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome pass(std::string detail) { return {true, std::move(detail)}; }
Outcome fail(std::string detail) { return {false, std::move(detail)}; }

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lwf_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("acceptance: cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.5, double hi = 1.5) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v));
}

// Keeps coordinates away from zero so kinked ops (relu) stay locally
// linear across the finite-difference stencil.
Tensor random_tensor_off_zero(Rng& rng, std::vector<int> shape, double margin = 0.05) {
    Tensor t = random_tensor(rng, std::move(shape), margin, 1.5);
    for (auto& x : t.mutable_data()) {
        if (rng.uniform() < 0.5) x = -x;
    }
    return t;
}

Tensor project(const Tensor& out, const Tensor& weights) { return sum_all(mul(out, weights)); }

ModelConfig tiny_model_config(int vocab_size) {
    ModelConfig cfg;
    cfg.n_mels = 6;
    cfg.d_model = 8;
    cfg.n_temporal_blocks = 1;
    cfg.dilation_schedule = {2};
    cfg.n_tf_blocks = 1;
    cfg.n_decoder_blocks = 1;
    cfg.n_heads = 2;
    cfg.vocab_size = vocab_size;
    cfg.max_caption_len = 10;
    return cfg;
}

// Random in-memory stream: features [T,6], tokens <sos> w... <eos> with
// content ids in [4, vocab_size).
std::vector<TrainExample> random_examples(Rng& rng, int count, int vocab_size) {
    std::vector<TrainExample> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        TrainExample ex;
        const int frames = 4 + static_cast<int>(rng.below(5));
        ex.features = random_tensor(rng, {frames, 6});
        std::vector<int> tokens{1};
        const int words = 1 + static_cast<int>(rng.below(4));
        for (int w = 0; w < words; ++w) {
            tokens.push_back(4 + static_cast<int>(rng.below(static_cast<uint64_t>(vocab_size - 4))));
        }
        tokens.push_back(2);
        ex.tokens = std::move(tokens);
        ex.clip_id = "mem_" + std::to_string(i);
        out.push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------------
// Criterion 1: finite-difference gradient checks, op level and model level
// ---------------------------------------------------------------------

Outcome check_gradients() {
    Rng rng(20260814);
    double worst_op = 0.0;
    std::string worst_op_name;
    auto check = [&](const char* name, const std::function<Tensor(const Tensor&)>& fn,
                     const Tensor& point) {
        const double err = finite_diff_check(fn, point);
        if (err > worst_op) {
            worst_op = err;
            worst_op_name = name;
        }
    };

    for (int trial = 0; trial < 2; ++trial) {
        Tensor a = random_tensor(rng, {3, 4});
        Tensor b = random_tensor(rng, {3, 4});
        Tensor w34 = random_tensor(rng, {3, 4});
        Tensor w43 = random_tensor(rng, {4, 3});
        check("add.lhs", [&](const Tensor& x) { return project(add(x, b), w34); }, a);
        check("add.rhs", [&](const Tensor& x) { return project(add(a, x), w34); }, b);
        check("sub.lhs", [&](const Tensor& x) { return project(sub(x, b), w34); }, a);
        check("sub.rhs", [&](const Tensor& x) { return project(sub(a, x), w34); }, b);
        check("mul.lhs", [&](const Tensor& x) { return project(mul(x, b), w34); }, a);
        check("mul.rhs", [&](const Tensor& x) { return project(mul(a, x), w34); }, b);
        check("scale", [&](const Tensor& x) { return project(scale(x, -2.5), w34); }, a);
        check("transpose", [&](const Tensor& x) { return project(transpose(x), w43); }, a);
        check("reshape", [&](const Tensor& x) { return project(reshape(x, {4, 3}), w43); }, a);
        check("sum_all", [&](const Tensor& x) { return sum_all(x); }, a);

        Tensor bias = random_tensor(rng, {4});
        check("add_bias.x", [&](const Tensor& x) { return project(add_bias(x, bias), w34); }, a);
        check("add_bias.b", [&](const Tensor& x) { return project(add_bias(a, x), w34); }, bias);

        Tensor cols = random_tensor(rng, {3, 2});
        Tensor w36 = random_tensor(rng, {3, 6});
        check("concat_cols.lhs",
              [&](const Tensor& x) { return project(concat_cols(x, cols), w36); }, a);
        check("concat_cols.rhs",
              [&](const Tensor& x) { return project(concat_cols(a, x), w36); }, cols);

        Tensor m23 = random_tensor(rng, {2, 3});
        Tensor m34 = random_tensor(rng, {3, 4});
        Tensor w24 = random_tensor(rng, {2, 4});
        check("matmul.lhs", [&](const Tensor& x) { return project(matmul(x, m34), w24); }, m23);
        check("matmul.rhs", [&](const Tensor& x) { return project(matmul(m23, x), w24); }, m34);

        Tensor smooth = random_tensor(rng, {3, 4});
        check("tanh", [&](const Tensor& x) { return project(lwf::tanh(x), w34); }, smooth);
        check("sigmoid", [&](const Tensor& x) { return project(sigmoid(x), w34); }, smooth);
        Tensor kinked = random_tensor_off_zero(rng, {3, 4});
        check("relu", [&](const Tensor& x) { return project(relu(x), w34); }, kinked);

        Tensor table = random_tensor(rng, {5, 3});
        std::vector<int> ids{4, 0, 2, 0};
        Tensor w43b = random_tensor(rng, {4, 3});
        check("embed_rows",
              [&](const Tensor& x) { return project(embed_rows(x, ids), w43b); }, table);

        Tensor xn = random_tensor(rng, {3, 5});
        Tensor gamma = random_tensor(rng, {5}, 0.5, 1.5);
        Tensor beta = random_tensor(rng, {5});
        Tensor w35 = random_tensor(rng, {3, 5});
        check("layer_norm.x",
              [&](const Tensor& t) { return project(layer_norm(t, gamma, beta), w35); }, xn);
        check("layer_norm.gamma",
              [&](const Tensor& t) { return project(layer_norm(xn, t, beta), w35); }, gamma);
        check("layer_norm.beta",
              [&](const Tensor& t) { return project(layer_norm(xn, gamma, t), w35); }, beta);

        Tensor cx = random_tensor(rng, {6, 2});
        Tensor cw = random_tensor(rng, {3, 2, 3});
        Tensor cb = random_tensor(rng, {3});
        Tensor cproj = random_tensor(rng, {6, 3});
        for (int dil : {1, 2}) {
            check("conv1d.x",
                  [&](const Tensor& t) { return project(conv1d_same(t, cw, cb, dil), cproj); },
                  cx);
            check("conv1d.w",
                  [&](const Tensor& t) { return project(conv1d_same(cx, t, cb, dil), cproj); },
                  cw);
            check("conv1d.b",
                  [&](const Tensor& t) { return project(conv1d_same(cx, cw, t, dil), cproj); },
                  cb);
        }

        Tensor dx = random_tensor(rng, {4, 5, 2});
        Tensor dw = random_tensor(rng, {2, 3, 3});
        Tensor db = random_tensor(rng, {2});
        Tensor dproj = random_tensor(rng, {4, 5, 2});
        check("dwconv.x",
              [&](const Tensor& t) { return project(depthwise_conv2d_same(t, dw, db), dproj); },
              dx);
        check("dwconv.w",
              [&](const Tensor& t) { return project(depthwise_conv2d_same(dx, t, db), dproj); },
              dw);
        check("dwconv.b",
              [&](const Tensor& t) { return project(depthwise_conv2d_same(dx, dw, t), dproj); },
              db);

        Tensor logits = random_tensor(rng, {3, 5});
        check("softmax_t", [&](const Tensor& x) { return project(softmax_t(x, 2.0), w35); },
              logits);
        std::vector<int> targets{1, 4, 0};
        check("cross_entropy",
              [&](const Tensor& x) { return cross_entropy_indices(targets, softmax_t(x, 1.0)); },
              logits);
        check("cross_entropy.masked",
              [&](const Tensor& x) {
                  return cross_entropy_indices(targets, softmax_t(x, 1.0), {1, 0, 1});
              },
              logits);
        Tensor teacher_logits = random_tensor(rng, {3, 5});
        Tensor teacher = softmax_t(teacher_logits, 2.0).detached_copy();
        check("kl.student",
              [&](const Tensor& x) { return kl_divergence(teacher, softmax_t(x, 2.0)); }, logits);
    }
    if (worst_op >= 1e-4) {
        return fail(fmt("op-level gradient check: %s rel err %.3e >= 1e-4",
                        worst_op_name.c_str(), worst_op));
    }

    // Every parameter of the full tiny model, through encode+decode+CE.
    Model m(tiny_model_config(9), 61);
    Tensor x = random_tensor(rng, {6, 6});
    const std::vector<int> y_in{1, 4, 5, 6, 7};
    const std::vector<int> targets{4, 5, 6, 7, 2};
    double worst_model = 0.0;
    std::string worst_param;
    for (const auto& name : m.param_names()) {
        Tensor& slot = m.mutable_param(name);
        const Tensor point = slot.detached_copy();
        auto fn = [&](const Tensor& t) {
            Tensor saved = slot;
            slot = t;
            Tensor loss =
                cross_entropy_indices(targets, softmax_t(m.decode(m.encode(x), y_in), 1.0));
            slot = saved;
            return loss;
        };
        const double err = finite_diff_check(fn, point);
        if (err > worst_model) {
            worst_model = err;
            worst_param = name;
        }
    }
    if (worst_model >= 1e-3) {
        return fail(fmt("model-level gradient check: %s rel err %.3e >= 1e-3",
                        worst_param.c_str(), worst_model));
    }
    return pass(fmt("worst op %.2e (%s), worst model param %.2e (%s)", worst_op,
                    worst_op_name.c_str(), worst_model, worst_param.c_str()));
}

// ---------------------------------------------------------------------
// Criterion 2: loss combination algebra, exact identity and bitwise
// fine-tuning equivalence at the lambda = 0 endpoint
// ---------------------------------------------------------------------

Outcome check_loss_algebra() {
    Rng rng(4242);
    const int kTriples = 1000;
    for (int i = 0; i < kTriples; ++i) {
        const int steps = 3 + static_cast<int>(rng.below(4));
        const int width = 7;
        std::vector<int> targets(static_cast<size_t>(steps));
        for (auto& t : targets) t = static_cast<int>(rng.below(width));
        Tensor logits = random_tensor(rng, {steps, width}, -3.0, 3.0);
        Tensor base_logits = random_tensor(rng, {steps, width}, -3.0, 3.0);
        double lambda;
        if (i % 5 == 0) {
            lambda = 0.0;
        } else if (i % 5 == 1) {
            lambda = 1.0;
        } else {
            lambda = rng.uniform();
        }
        const TotalLoss loss = total_loss(
            {targets}, {softmax_t(logits, 1.0)}, {softmax_t(logits, 2.0)},
            {softmax_t(base_logits, 2.0).detached_copy()}, lambda);
        const LossBreakdown& b = loss.breakdown;
        if (b.l_tot != (1.0 - lambda) * b.l_new + lambda * b.l_reg) {
            return fail(fmt("identity broken at triple %d: l_tot %.17g vs recombined %.17g", i,
                            b.l_tot, (1.0 - lambda) * b.l_new + lambda * b.l_reg));
        }
        if (lambda == 0.0 && (b.l_tot != b.l_new || b.l_reg != 0.0)) {
            return fail(fmt("lambda=0 endpoint does not alias l_new at triple %d", i));
        }
        if (lambda == 1.0 && b.l_tot != b.l_reg) {
            return fail(fmt("lambda=1 endpoint does not alias l_reg at triple %d", i));
        }
    }

    // lambda = 0 continual pass vs a teacher-free fine-tuning loop: same
    // stream order, same optimizer; parameters and per-update losses must
    // agree bitwise across 50 updates.
    const int kUpdates = 50;
    const ModelConfig mc = tiny_model_config(9);
    const Model base(mc, 77);
    Model student_a = clone_model(base);
    Model student_b = clone_model(base);
    Rng data_rng(910);
    const std::vector<TrainExample> examples = random_examples(data_rng, kUpdates * 2, 9);
    const Vocabulary vocab = build_vocabulary({"aa bb cc dd ee"});

    ContinualRunConfig ccfg;
    ccfg.lambda = 0.0;
    ccfg.batch_size = 2;
    ccfg.checkpoint_updates = {};
    ccfg.eval_at_end = false;
    ccfg.shuffle_seed = 3;
    const ContinualRunResult run =
        continual_run(base, student_a, examples, vocab, {}, {}, ccfg);
    if (run.loss_trace.size() != static_cast<size_t>(kUpdates)) {
        return fail(fmt("expected %d updates, got %zu", kUpdates, run.loss_trace.size()));
    }

    StreamConfig scfg;
    scfg.batch_size = 2;
    scfg.shuffle_seed = 3;
    const std::vector<Batch> batches = stream_batches(examples, scfg);
    AdamState adam_state = AdamState::init(student_b.params());
    AdamConfig adam_cfg;  // both sides on defaults
    for (size_t i = 0; i < batches.size(); ++i) {
        student_b.zero_grad();
        Tensor ce = batch_cross_entropy(student_b, batches[i]);
        backward(ce);
        adam_step(student_b.params(), adam_state, adam_cfg);
        if (ce.item() != run.loss_trace[i].l_tot) {
            return fail(fmt("update %zu: fine-tune CE %.17g != continual l_tot %.17g", i,
                            ce.item(), run.loss_trace[i].l_tot));
        }
    }
    if (student_a.param_hash() != student_b.param_hash()) {
        return fail("parameters diverged between the lambda=0 continual pass and plain "
                    "fine-tuning");
    }
    return pass(fmt("%d random triples exact; 50-update lambda=0 run bitwise-equal to "
                    "fine-tuning (hash %016llx)",
                    kTriples, static_cast<unsigned long long>(student_a.param_hash())));
}

// ---------------------------------------------------------------------
// Criterion 3: the base model stays frozen across a 200-update run
// ---------------------------------------------------------------------

Outcome check_frozen_teacher() {
    const ModelConfig mc = tiny_model_config(9);
    const Model base(mc, 5);
    Model student = clone_model(base);
    Rng rng(550);
    const std::vector<TrainExample> examples = random_examples(rng, 200, 9);
    const Vocabulary vocab = build_vocabulary({"aa bb cc dd ee"});

    const uint64_t hash_before = base.param_hash();
    ContinualRunConfig ccfg;
    ccfg.lambda = 0.85;
    ccfg.batch_size = 1;
    ccfg.checkpoint_updates = {};
    ccfg.eval_at_end = false;
    const ContinualRunResult run =
        continual_run(base, student, examples, vocab, {}, {}, ccfg);
    const uint64_t hash_after = base.param_hash();

    if (run.loss_trace.size() != 200) {
        return fail(fmt("expected 200 updates, got %zu", run.loss_trace.size()));
    }
    if (hash_before != hash_after || run.teacher_hash_before != hash_before ||
        run.teacher_hash_after != hash_after) {
        return fail(fmt("teacher hash drifted: %016llx -> %016llx",
                        static_cast<unsigned long long>(hash_before),
                        static_cast<unsigned long long>(hash_after)));
    }
    if (student.param_hash() == hash_before) {
        return fail("student never moved; the run trained nothing");
    }
    return pass(fmt("hash %016llx unchanged over 200 updates (student did move)",
                    static_cast<unsigned long long>(hash_before)));
}

// ---------------------------------------------------------------------
// Criterion 4: distillation fixed point at teacher == student, lambda = 1
// ---------------------------------------------------------------------

Outcome check_distillation_fixed_point() {
    const ModelConfig mc = tiny_model_config(9);
    const Model base(mc, 9);
    Model student = clone_model(base);
    Rng rng(660);
    const Batch batch = pad_batch(random_examples(rng, 4, 9));

    ContinualRunConfig ccfg;
    ccfg.lambda = 1.0;
    ccfg.batch_size = 4;
    AdamState adam_state = AdamState::init(student.params());
    const auto before = student.dump_param_values();
    const LossBreakdown step = continual_step(base, student, batch, ccfg, adam_state);
    const auto after = student.dump_param_values();

    if (step.l_reg != 0.0 || step.l_tot != 0.0) {
        return fail(fmt("identical models should distill to zero: l_reg %.17g, l_tot %.17g",
                        step.l_reg, step.l_tot));
    }
    double max_move = 0.0;
    for (size_t p = 0; p < before.size(); ++p) {
        for (size_t k = 0; k < before[p].second.size(); ++k) {
            max_move = std::max(max_move,
                                std::abs(after[p].second[k] - before[p].second[k]));
        }
    }
    if (!(max_move < ccfg.adam.alpha)) {
        return fail(fmt("per-coordinate movement %.3e not below alpha %.3e", max_move,
                        ccfg.adam.alpha));
    }
    return pass(fmt("l_reg = 0 exactly; max movement %.2e < alpha %.0e", max_move,
                    ccfg.adam.alpha));
}

// ---------------------------------------------------------------------
// Criterion 5: overfit probe, 8 clips memorized and reproduced
// ---------------------------------------------------------------------

Outcome check_overfit_probe() {
    const auto started = std::chrono::steady_clock::now();
    const fs::path dir = scratch_dir("overfit");
    SynthConfig sc;
    sc.n_classes = 4;
    sc.frames = 16;
    sc.vocab_words = 30;
    sc.overlap = 0.6;
    sc.ori_train_clips = 8;
    sc.ori_val_clips = 1;
    sc.ori_eval_clips = 1;
    sc.ori_captions_per_clip = 1;
    sc.new_train_clips = 1;
    sc.new_eval_clips = 1;
    generate_datasets(sc, 8, 5, dir.string(), false);

    const Vocabulary vocab = load_vocabulary((dir / "ori/vocab.txt").string());
    const auto clips = load_manifest((dir / "ori/train.csv").string());
    const auto examples = make_examples(clips, vocab, false);

    ModelConfig mc;
    mc.n_mels = 8;
    mc.d_model = 16;
    mc.n_temporal_blocks = 1;
    mc.dilation_schedule = {2};
    mc.n_tf_blocks = 1;
    mc.n_decoder_blocks = 1;
    mc.n_heads = 2;
    mc.vocab_size = vocab.size();
    mc.max_caption_len = 12;
    Model model(mc, 5);

    PretrainConfig pc;
    pc.adam.alpha = 0.01;
    pc.batch_size = 4;
    pc.max_epochs = 300;
    pc.stop.patience = 300;  // run the full budget, no early stop
    // Validating on the training clips themselves makes "best epoch" mean
    // "best memorization", which is exactly what the probe wants.
    const PretrainResult result = pretrain(model, examples, clips, vocab, pc);

    int first_below = -1;
    for (const auto& entry : result.log) {
        if (entry.train_ce < 0.1) {
            first_below = entry.epoch;
            break;
        }
    }
    if (first_below < 0) {
        double final_ce = result.log.empty() ? -1.0 : result.log.back().train_ce;
        return fail(fmt("train CE never dropped below 0.1 in %d epochs (final %.4f)",
                        result.epochs_run, final_ce));
    }

    const EvalReport report = evaluate_dataset(model, clips, vocab, "train");
    int reproduced = 0;
    for (size_t i = 0; i < clips.size(); ++i) {
        if (report.candidates[i] == clips[i].captions[0]) ++reproduced;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (reproduced < 7) {
        return fail(fmt("only %d/8 training captions reproduced exactly", reproduced));
    }
    if (seconds > 300.0) {
        return fail(fmt("probe took %.0f s, budget is 300 s", seconds));
    }
    return pass(fmt("CE < 0.1 at epoch %d; %d/8 captions reproduced; %.1f s", first_below,
                    reproduced, seconds));
}

// ---------------------------------------------------------------------
// Criteria 6 and 9 share one pretrained fixture
// ---------------------------------------------------------------------

struct DirectionalFixture {
    RunConfig cfg;
    fs::path data;
    fs::path teacher;
};

RunConfig directional_config() {
    RunConfig rc;
    rc.seed = 2;
    rc.model.n_mels = 8;
    rc.model.d_model = 16;
    rc.model.n_temporal_blocks = 1;
    rc.model.dilation_schedule = {2};
    rc.model.n_tf_blocks = 1;
    rc.model.n_decoder_blocks = 1;
    rc.model.n_heads = 2;
    rc.model.max_caption_len = 12;
    rc.pretrain.adam.alpha = 0.003;
    rc.continual.adam.alpha = 0.003;
    rc.pretrain.batch_size = 4;
    rc.pretrain.max_epochs = 30;
    rc.pretrain.stop.patience = 6;
    rc.continual.batch_size = 4;
    rc.continual.checkpoint_updates = {};
    rc.synth.n_classes = 4;
    rc.synth.frames = 16;
    rc.synth.vocab_words = 30;
    rc.synth.overlap = 0.6;
    rc.synth.ori_train_clips = 24;
    rc.synth.ori_val_clips = 4;
    rc.synth.ori_eval_clips = 8;
    rc.synth.ori_captions_per_clip = 5;
    rc.synth.new_train_clips = 120;
    rc.synth.new_eval_clips = 8;
    rc.synth.new_captions_per_clip = 1;
    return rc;
}

const DirectionalFixture& directional_fixture() {
    static const DirectionalFixture fx = [] {
        DirectionalFixture f;
        f.cfg = directional_config();
        const fs::path root = scratch_dir("directional");
        f.data = root / "data";
        cmd_synth(f.cfg, f.data.string(), false);
        cmd_pretrain(f.cfg, (f.data / "ori").string(), (root / "teach").string());
        f.teacher = root / "teach/teacher.lwfc";
        return f;
    }();
    return fx;
}

// ---------------------------------------------------------------------
// Criterion 6: retention/adaptation trade-off. Datasets with 60% word
// overlap; the intermediate lambda must retain old-data performance
// better than fine-tuning and learn new data better than distill-only.
// ---------------------------------------------------------------------

Outcome check_directional_tradeoff() {
    const auto started = std::chrono::steady_clock::now();
    const DirectionalFixture& fx = directional_fixture();
    const fs::path out = scratch_dir("directional_sweep");
    const auto cells =
        cmd_sweep(fx.cfg, fx.teacher.string(), (fx.data / "new").string(),
                  (fx.data / "ori").string(), {0.0, 0.85, 1.0}, {4}, out.string());
    if (cells.size() != 3) return fail(fmt("expected 3 cells, got %zu", cells.size()));
    for (const SweepCell& cell : cells) {
        if (cell.failed) return fail("a sweep cell failed: " + cell.error);
    }
    const SweepCell& finetune = cells[0];      // lambda 0.0
    const SweepCell& balanced = cells[1];      // lambda 0.85
    const SweepCell& distill_only = cells[2];  // lambda 1.0
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    const std::string detail = fmt(
        "ori: %.3f@0.85 vs %.3f@0 | new: %.3f@0.85 vs %.3f@1 | %.1f s",
        balanced.spider_ori, finetune.spider_ori, balanced.spider_new,
        distill_only.spider_new, seconds);
    if (!(balanced.spider_ori > finetune.spider_ori)) {
        return fail("old-data retention did not beat plain fine-tuning — " + detail);
    }
    if (!(balanced.spider_new > distill_only.spider_new)) {
        return fail("new-data adaptation did not beat distillation-only — " + detail);
    }
    if (seconds > 1200.0) {
        return fail(fmt("experiment took %.0f s, budget is 1200 s", seconds));
    }
    return pass(detail);
}

// ---------------------------------------------------------------------
// Criterion 7: captioning metric against an independent brute-force
// TF-IDF/cosine oracle
// ---------------------------------------------------------------------

namespace oracle {

// Deliberately different machinery from the production scorer: n-grams
// as token vectors (no joined keys, no ordered maps), counts by linear
// scan, document frequency by rescanning the corpus.

using Gram = std::vector<std::string>;

std::vector<Gram> grams_of(const std::vector<std::string>& tokens, int n) {
    std::vector<Gram> out;
    if (static_cast<int>(tokens.size()) < n) return out;
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
        out.emplace_back(tokens.begin() + static_cast<long>(i),
                         tokens.begin() + static_cast<long>(i) + n);
    }
    return out;
}

int count_of(const std::vector<Gram>& grams, const Gram& g) {
    int c = 0;
    for (const Gram& x : grams) {
        if (x == g) ++c;
    }
    return c;
}

std::vector<Gram> distinct(std::vector<Gram> grams) {
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    return grams;
}

struct Corpus {
    std::vector<std::vector<std::string>> cand_tokens;
    std::vector<std::vector<std::vector<std::string>>> ref_tokens;
};

double idf(const Corpus& corpus, const Gram& g, int n) {
    int df = 0;
    for (const auto& item_refs : corpus.ref_tokens) {
        bool seen = false;
        for (const auto& ref : item_refs) {
            if (count_of(grams_of(ref, n), g) > 0) {
                seen = true;
                break;
            }
        }
        if (seen) ++df;
    }
    return std::log(static_cast<double>(corpus.ref_tokens.size()) /
                    static_cast<double>(std::max(df, 1)));
}

std::vector<double> per_item_scores(const std::vector<std::string>& candidates,
                                    const std::vector<std::vector<std::string>>& references) {
    Corpus corpus;
    for (size_t i = 0; i < candidates.size(); ++i) {
        corpus.cand_tokens.push_back(eval_tokenize(candidates[i]));
        corpus.ref_tokens.emplace_back();
        for (const std::string& r : references[i]) {
            corpus.ref_tokens.back().push_back(eval_tokenize(r));
        }
    }

    std::vector<double> scores;
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto& cand = corpus.cand_tokens[i];
        const auto& refs = corpus.ref_tokens[i];
        double across_n = 0.0;
        for (int n = 1; n <= 4; ++n) {
            const auto cand_grams = grams_of(cand, n);
            double over_refs = 0.0;
            for (const auto& ref : refs) {
                const auto ref_grams = grams_of(ref, n);
                double num = 0.0;
                double hh = 0.0;
                double rr = 0.0;
                for (const Gram& g : distinct(cand_grams)) {
                    const double w = idf(corpus, g, n);
                    const double h = count_of(cand_grams, g) * w;
                    const double rv = count_of(ref_grams, g) * w;
                    num += std::min(h, rv) * rv;
                    hh += h * h;
                }
                for (const Gram& g : distinct(ref_grams)) {
                    const double rv = count_of(ref_grams, g) * idf(corpus, g, n);
                    rr += rv * rv;
                }
                const double delta =
                    static_cast<double>(cand.size()) - static_cast<double>(ref.size());
                const double penalty = std::exp(-(delta * delta) / 72.0);
                if (hh > 0.0 && rr > 0.0) over_refs += penalty * num / std::sqrt(hh * rr);
            }
            across_n += over_refs;
        }
        scores.push_back(across_n / 4.0 / static_cast<double>(refs.size()) * 10.0);
    }
    return scores;
}

}  // namespace oracle

Outcome check_metric_oracle() {
    struct TestCorpus {
        std::string name;
        std::vector<std::string> candidates;
        std::vector<std::vector<std::string>> references;
        bool expect_exact_ten = false;
    };
    const std::vector<TestCorpus> corpora = {
        {"identity",
         {"dog barks loudly today", "cat sleeps quietly inside", "bird sings sweetly outside"},
         {{"dog barks loudly today"},
          {"cat sleeps quietly inside"},
          {"bird sings sweetly outside"}},
         true},
        {"typical",
         {"a man plays the guitar", "rain falls on the roof", "children laugh in the park"},
         {{"a man plays a guitar", "someone plays the guitar loudly"},
          {"rain falls on a roof", "heavy rain hits the roof", "water drips from the roof"},
          {"children are laughing outside", "kids laugh loudly in a park"}}},
        {"clipping",
         {"red red red red ball", "the the dog dog"},
         {{"a red ball bounces", "the ball is red"}, {"the dog runs", "a dog barks"}}},
        {"length-mismatch",
         {"engine", "a very long description of a quiet machine humming in a large empty hall"},
         {{"a heavy engine idles slowly nearby", "the engine is running"},
          {"machine hums", "a machine hums quietly"}}},
        {"shared-phrases",
         {"water flows over rocks", "water flows down the drain", "wind blows over rocks",
          "birds fly over the water", "a stream flows quietly", "rocks fall into water"},
         {{"water flows over the rocks", "a stream runs over rocks"},
          {"water runs down a drain", "the drain gurgles with water"},
          {"wind moves over the rocks", "a breeze blows across rocks"},
          {"birds fly above the water", "seagulls glide over water"},
          {"a quiet stream flows", "the stream moves quietly"},
          {"rocks splash into the water", "stones fall in water"}}},
    };

    double worst = 0.0;
    std::string worst_at;
    for (const TestCorpus& tc : corpora) {
        const CiderResult got = cider(tc.candidates, tc.references);
        const std::vector<double> want = oracle::per_item_scores(tc.candidates, tc.references);
        if (got.per_item.size() != want.size()) {
            return fail("per-item count mismatch on corpus " + tc.name);
        }
        double want_corpus = 0.0;
        for (size_t i = 0; i < want.size(); ++i) {
            const double diff = std::abs(got.per_item[i] - want[i]);
            if (diff > worst) {
                worst = diff;
                worst_at = tc.name + "[" + std::to_string(i) + "]";
            }
            want_corpus += want[i];
        }
        want_corpus /= static_cast<double>(want.size());
        const double corpus_diff = std::abs(got.corpus - want_corpus);
        if (corpus_diff > worst) {
            worst = corpus_diff;
            worst_at = tc.name + "[corpus]";
        }
        if (tc.expect_exact_ten) {
            for (size_t i = 0; i < got.per_item.size(); ++i) {
                if (got.per_item[i] != 10.0) {
                    return fail(fmt("identical caption item %zu scored %.17g, want exactly 10",
                                    i, got.per_item[i]));
                }
            }
            if (got.corpus != 10.0) {
                return fail(fmt("identity corpus scored %.17g, want exactly 10", got.corpus));
            }
        }
    }
    if (worst > 1e-10) {
        return fail(fmt("oracle disagreement %.3e at %s (tolerance 1e-10)", worst,
                        worst_at.c_str()));
    }
    return pass(fmt("5 corpora within %.1e of the oracle; identity corpus exactly 10", worst));
}

// ---------------------------------------------------------------------
// Criterion 8: single-pass stream coverage for random (n, B) pairs
// ---------------------------------------------------------------------

Outcome check_stream_contract() {
    Rng rng(8080);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        int batch_size;
        if (trial == 0) {
            batch_size = 4;
        } else if (trial == 1) {
            batch_size = 8;
        } else if (trial == 2) {
            batch_size = 12;
        } else {
            batch_size = 1 + static_cast<int>(rng.below(16));
        }
        const int n = 1 + static_cast<int>(rng.below(400));

        std::vector<TrainExample> examples;
        examples.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            TrainExample ex;
            ex.features = Tensor({1, 1}, {0.0});
            ex.tokens = {1, 2};
            ex.clip_id = std::to_string(i);
            examples.push_back(std::move(ex));
        }
        StreamConfig scfg;
        scfg.batch_size = batch_size;
        scfg.shuffle_seed = rng.next_u64();
        const std::vector<Batch> batches = stream_batches(examples, scfg);

        const size_t expected_batches = num_batches(static_cast<size_t>(n), batch_size);
        if (batches.size() != expected_batches ||
            expected_batches !=
                (static_cast<size_t>(n) + static_cast<size_t>(batch_size) - 1) /
                    static_cast<size_t>(batch_size)) {
            return fail(fmt("n=%d B=%d: got %zu batches, want ceil = %zu", n, batch_size,
                            batches.size(), expected_batches));
        }
        std::vector<int> seen(static_cast<size_t>(n), 0);
        for (size_t b = 0; b < batches.size(); ++b) {
            const int want_size =
                b + 1 < batches.size()
                    ? batch_size
                    : n - static_cast<int>(b) * batch_size;
            if (batches[b].size() != want_size) {
                return fail(fmt("n=%d B=%d: batch %zu has %d examples, want %d", n, batch_size,
                                b, batches[b].size(), want_size));
            }
            for (const std::string& id : batches[b].clip_ids) {
                seen[static_cast<size_t>(std::stoi(id))] += 1;
            }
        }
        for (int i = 0; i < n; ++i) {
            if (seen[static_cast<size_t>(i)] != 1) {
                return fail(fmt("n=%d B=%d: example %d appeared %d times", n, batch_size, i,
                                seen[static_cast<size_t>(i)]));
            }
        }
        ++checked;
    }
    return pass(fmt("%d random (n, B) pairs covered exactly once, incl. B in {4, 8, 12}",
                    checked));
}

// ---------------------------------------------------------------------
// Criterion 9: sweep tables are byte-identical across reruns
// ---------------------------------------------------------------------

Outcome check_reproducible_sweep() {
    const DirectionalFixture& fx = directional_fixture();
    const std::vector<double> lambdas = {0.8, 0.9};
    const std::vector<int> batches = {2, 4};
    const fs::path out1 = scratch_dir("sweep_rerun_1");
    const fs::path out2 = scratch_dir("sweep_rerun_2");
    cmd_sweep(fx.cfg, fx.teacher.string(), (fx.data / "new").string(),
              (fx.data / "ori").string(), lambdas, batches, out1.string());
    cmd_sweep(fx.cfg, fx.teacher.string(), (fx.data / "new").string(),
              (fx.data / "ori").string(), lambdas, batches, out2.string());
    const std::string csv1 = read_bytes(out1 / "results.csv");
    const std::string csv2 = read_bytes(out2 / "results.csv");
    const std::string json1 = read_bytes(out1 / "results.json");
    const std::string json2 = read_bytes(out2 / "results.json");
    if (csv1 != csv2) return fail("results.csv differs between identical sweep runs");
    if (json1 != json2) return fail("results.json differs between identical sweep runs");
    if (std::count(csv1.begin(), csv1.end(), '\n') != 5) {
        return fail("expected a header plus 4 rows in the 2x2 table");
    }
    return pass(fmt("2x2 grid rerun byte-identical (%zu-byte csv, %zu-byte json)", csv1.size(),
                    json1.size()));
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient checks (ops + full model)", check_gradients},
        {"loss algebra and lambda endpoints", check_loss_algebra},
        {"frozen base model over 200 updates", check_frozen_teacher},
        {"distillation fixed point", check_distillation_fixed_point},
        {"overfit probe on 8 clips", check_overfit_probe},
        {"retention/adaptation trade-off", check_directional_tradeoff},
        {"captioning metric vs brute-force oracle", check_metric_oracle},
        {"stream single-pass coverage", check_stream_contract},
        {"byte-identical sweep tables", check_reproducible_sweep},
    };

    int failures = 0;
    for (const auto& [name, run] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = run();
        } catch (const std::exception& e) {
            outcome = fail(std::string("unexpected exception: ") + e.what());
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %-42s %s (%.1f s)\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
                    outcome.detail.c_str(), seconds);
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    if (failures == 0) {
        std::printf("acceptance: all %zu criteria passed\n", criteria.size());
        return 0;
    }
    std::printf("acceptance: %d of %zu criteria FAILED\n", failures, criteria.size());
    return 1;
}
