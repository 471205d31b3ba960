#include "lwf/model.hpp"

#include <algorithm>
#include <cmath>

#include "lwf/error.hpp"
#include "lwf/losses.hpp"
#include "lwf/ops.hpp"
#include "lwf/rng.hpp"
#include "lwf/vocab.hpp"

namespace lwf {

namespace {
constexpr double kMaskValue = -1e30;
}

void ModelConfig::validate() const {
    if (n_mels < 1) throw ConfigError("model: n_mels must be positive");
    if (d_model < 1) throw ConfigError("model: d_model must be positive");
    if (n_temporal_blocks < 1) throw ConfigError("model: n_temporal_blocks must be positive");
    if (static_cast<int>(dilation_schedule.size()) != n_temporal_blocks) {
        throw ConfigError("model: dilation_schedule must list one dilation per temporal block (" +
                          std::to_string(dilation_schedule.size()) + " given, " +
                          std::to_string(n_temporal_blocks) + " expected)");
    }
    for (int d : dilation_schedule) {
        if (d < 1) throw ConfigError("model: dilations must be >= 1");
    }
    if (n_tf_blocks < 1) throw ConfigError("model: n_tf_blocks must be positive");
    if (n_decoder_blocks < 1) throw ConfigError("model: n_decoder_blocks must be positive");
    if (n_heads < 1) throw ConfigError("model: n_heads must be positive");
    if (d_model % n_heads != 0) {
        throw ConfigError("model: d_model (" + std::to_string(d_model) +
                          ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    }
    if (vocab_size < 4) throw ConfigError("model: vocab_size must be at least 4");
    if (max_caption_len < 2) throw ConfigError("model: max_caption_len must be at least 2");
    if (!(classifier_temperature > 0.0)) {
        throw ConfigError("model: classifier_temperature must be positive");
    }
}

bool ModelConfig::operator==(const ModelConfig& other) const {
    return n_mels == other.n_mels && d_model == other.d_model &&
           n_temporal_blocks == other.n_temporal_blocks &&
           dilation_schedule == other.dilation_schedule && n_tf_blocks == other.n_tf_blocks &&
           n_decoder_blocks == other.n_decoder_blocks && n_heads == other.n_heads &&
           vocab_size == other.vocab_size && max_caption_len == other.max_caption_len &&
           classifier_temperature == other.classifier_temperature;
}

Tensor gated_conv_block(const Tensor& h, const Tensor& filter_w, const Tensor& filter_b,
                        const Tensor& gate_w, const Tensor& gate_b, int dilation) {
    Tensor f = tanh(conv1d_same(h, filter_w, filter_b, dilation));
    Tensor g = sigmoid(conv1d_same(h, gate_w, gate_b, dilation));
    return add(h, mul(f, g));
}

Tensor depthwise_separable_block(const Tensor& x, const Tensor& dw_w, const Tensor& dw_b,
                                 const Tensor& pw_w, const Tensor& pw_b) {
    Tensor spatial = depthwise_conv2d_same(x, dw_w, dw_b);
    const int t = spatial.dim(0), f = spatial.dim(1), c_in = spatial.dim(2);
    const int c_out = pw_w.dim(1);
    Tensor flat = reshape(spatial, {t * f, c_in});
    Tensor mixed = add_bias(matmul(flat, pw_w), pw_b);
    return relu(reshape(mixed, {t, f, c_out}));
}

Tensor sinusoidal_positional_encoding(int max_len, int d_model) {
    std::vector<double> pe(static_cast<size_t>(max_len) * d_model);
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < d_model; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / d_model;
            const double angle = pos / std::pow(10000.0, exponent);
            pe[static_cast<size_t>(pos) * d_model + i] =
                (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return Tensor({max_len, d_model}, std::move(pe));
}

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    const int d = cfg_.d_model;
    const int f = cfg_.n_mels;
    const int w = cfg_.vocab_size;
    const int dh = d / cfg_.n_heads;

    // Temporal branch.
    add_param("enc_temporal.in_proj.w", {f, d}, rng, f, d);
    add_zeros("enc_temporal.in_proj.b", {d});
    for (int b = 0; b < cfg_.n_temporal_blocks; ++b) {
        const std::string p = "enc_temporal.block" + std::to_string(b);
        add_param(p + ".filter.w", {d, d, kTemporalKernel}, rng, d * kTemporalKernel,
                  d * kTemporalKernel);
        add_zeros(p + ".filter.b", {d});
        add_param(p + ".gate.w", {d, d, kTemporalKernel}, rng, d * kTemporalKernel,
                  d * kTemporalKernel);
        add_zeros(p + ".gate.b", {d});
    }

    // Time-frequency branch: channels go 1 -> kTfChannels -> ... -> kTfChannels.
    for (int b = 0; b < cfg_.n_tf_blocks; ++b) {
        const std::string p = "enc_tf.block" + std::to_string(b);
        const int c_in = (b == 0) ? 1 : kTfChannels;
        add_param(p + ".dw.w", {c_in, kTfKernel, kTfKernel}, rng, kTfKernel * kTfKernel,
                  kTfKernel * kTfKernel);
        add_zeros(p + ".dw.b", {c_in});
        add_param(p + ".pw.w", {c_in, kTfChannels}, rng, c_in, kTfChannels);
        add_zeros(p + ".pw.b", {kTfChannels});
    }
    add_param("enc_tf.out_proj.w", {f * kTfChannels, d}, rng, f * kTfChannels, d);
    add_zeros("enc_tf.out_proj.b", {d});

    // Merge projection.
    add_param("merge.w", {2 * d, d}, rng, 2 * d, d);
    add_zeros("merge.b", {d});

    // Decoder.
    add_param("dec.embed", {w, d}, rng, w, d);
    for (int b = 0; b < cfg_.n_decoder_blocks; ++b) {
        const std::string p = "dec.block" + std::to_string(b);
        for (const char* kind : {"self", "cross"}) {
            for (int h = 0; h < cfg_.n_heads; ++h) {
                const std::string hp = p + "." + kind + "." + std::to_string(h);
                add_param(hp + ".q.w", {d, dh}, rng, d, dh);
                add_param(hp + ".k.w", {d, dh}, rng, d, dh);
                add_param(hp + ".v.w", {d, dh}, rng, d, dh);
            }
            add_param(p + "." + std::string(kind) + ".out.w", {d, d}, rng, d, d);
            add_zeros(p + "." + std::string(kind) + ".out.b", {d});
        }
        for (const char* ln : {"ln1", "ln2", "ln3"}) {
            add_zeros(p + "." + ln + ".gamma", {d});
            Tensor& gamma = params_.back();
            for (auto& v : gamma.mutable_data()) v = 1.0;
            add_zeros(p + "." + std::string(ln) + ".beta", {d});
        }
        add_param(p + ".ffn.w1", {d, 4 * d}, rng, d, 4 * d);
        add_zeros(p + ".ffn.b1", {4 * d});
        add_param(p + ".ffn.w2", {4 * d, d}, rng, 4 * d, d);
        add_zeros(p + ".ffn.b2", {d});
    }
    add_param("dec.out.w", {d, w}, rng, d, w);
    add_zeros("dec.out.b", {w});

    positional_ = sinusoidal_positional_encoding(cfg_.max_caption_len, d);
}

Tensor& Model::add_param(const std::string& name, std::vector<int> shape, Rng& rng, int fan_in,
                         int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    Tensor t(std::move(shape), std::move(v), /*requires_grad=*/true);
    index_.emplace(name, params_.size());
    names_.push_back(name);
    params_.push_back(std::move(t));
    return params_.back();
}

Tensor& Model::add_zeros(const std::string& name, std::vector<int> shape) {
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    index_.emplace(name, params_.size());
    names_.push_back(name);
    params_.push_back(std::move(t));
    return params_.back();
}

Model Model::clone() const {
    Model copy(cfg_, /*seed=*/0);
    for (size_t i = 0; i < params_.size(); ++i) {
        copy.params_[i] = params_[i].detached_copy(params_[i].requires_grad());
    }
    return copy;
}

size_t Model::param_count_scalars() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
}

const Tensor& Model::param(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("model: unknown parameter '" + name + "'");
    return params_[it->second];
}

Tensor& Model::mutable_param(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("model: unknown parameter '" + name + "'");
    return params_[it->second];
}

void Model::set_trainable(bool on) {
    for (auto& p : params_) p.set_requires_grad(on);
}

void Model::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

uint64_t Model::param_hash() const {
    uint64_t h = fnv1a64(nullptr, 0);
    for (size_t i = 0; i < params_.size(); ++i) {
        h = fnv1a64(names_[i].data(), names_[i].size(), h);
        const auto d = params_[i].data();
        h = fnv1a64(d.data(), d.size() * sizeof(double), h);
    }
    return h;
}

void Model::load_param_values(
    const std::vector<std::pair<std::string, std::vector<double>>>& named) {
    if (named.size() != params_.size()) {
        throw FormatError("model: expected " + std::to_string(params_.size()) +
                          " parameter tensors, got " + std::to_string(named.size()));
    }
    for (const auto& [name, values] : named) {
        Tensor& p = mutable_param(name);
        if (values.size() != p.numel()) {
            throw FormatError("model: parameter '" + name + "' has " +
                              std::to_string(p.numel()) + " values, got " +
                              std::to_string(values.size()));
        }
        std::copy(values.begin(), values.end(), p.mutable_data().begin());
    }
}

std::vector<std::pair<std::string, std::vector<double>>> Model::dump_param_values() const {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    out.reserve(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        const auto d = params_[i].data();
        out.emplace_back(names_[i], std::vector<double>(d.begin(), d.end()));
    }
    return out;
}

Tensor Model::encode_temporal(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != cfg_.n_mels) {
        throw ConfigError("encode_temporal: expected [T, " + std::to_string(cfg_.n_mels) +
                          "] features, got " + shape_str(x.shape()));
    }
    Tensor h = add_bias(matmul(x, param("enc_temporal.in_proj.w")),
                        param("enc_temporal.in_proj.b"));
    for (int b = 0; b < cfg_.n_temporal_blocks; ++b) {
        const std::string p = "enc_temporal.block" + std::to_string(b);
        h = gated_conv_block(h, param(p + ".filter.w"), param(p + ".filter.b"),
                             param(p + ".gate.w"), param(p + ".gate.b"),
                             cfg_.dilation_schedule[static_cast<size_t>(b)]);
    }
    return h;
}

Tensor Model::encode_tf(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != cfg_.n_mels) {
        throw ConfigError("encode_tf: expected [T, " + std::to_string(cfg_.n_mels) +
                          "] features, got " + shape_str(x.shape()));
    }
    const int t = x.dim(0), f = x.dim(1);
    Tensor h = reshape(x, {t, f, 1});
    for (int b = 0; b < cfg_.n_tf_blocks; ++b) {
        const std::string p = "enc_tf.block" + std::to_string(b);
        h = depthwise_separable_block(h, param(p + ".dw.w"), param(p + ".dw.b"),
                                      param(p + ".pw.w"), param(p + ".pw.b"));
    }
    Tensor flat = reshape(h, {t, f * kTfChannels});
    return add_bias(matmul(flat, param("enc_tf.out_proj.w")), param("enc_tf.out_proj.b"));
}

Tensor Model::merge(const Tensor& h_temporal, const Tensor& h_tf) const {
    if (h_temporal.dim(0) != h_tf.dim(0)) {
        throw ShapeError("merge: temporal lengths differ (" +
                         std::to_string(h_temporal.dim(0)) + " vs " +
                         std::to_string(h_tf.dim(0)) + ")");
    }
    Tensor cat = concat_cols(h_temporal, h_tf);
    return relu(add_bias(matmul(cat, param("merge.w")), param("merge.b")));
}

Tensor Model::encode(const Tensor& x) const {
    return merge(encode_temporal(x), encode_tf(x));
}

Tensor Model::attention(const Tensor& queries_from, const Tensor& keys_from,
                        const std::string& prefix, bool causal) const {
    const int tq = queries_from.dim(0);
    const int tk = keys_from.dim(0);
    const int dh = cfg_.d_model / cfg_.n_heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor causal_mask;
    if (causal) {
        std::vector<double> m(static_cast<size_t>(tq) * tk, 0.0);
        for (int i = 0; i < tq; ++i) {
            for (int j = i + 1; j < tk; ++j) {
                m[static_cast<size_t>(i) * tk + j] = kMaskValue;
            }
        }
        causal_mask = Tensor({tq, tk}, std::move(m));
    }

    Tensor heads;
    for (int h = 0; h < cfg_.n_heads; ++h) {
        const std::string hp = prefix + "." + std::to_string(h);
        Tensor q = matmul(queries_from, param(hp + ".q.w"));
        Tensor k = matmul(keys_from, param(hp + ".k.w"));
        Tensor v = matmul(keys_from, param(hp + ".v.w"));
        Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_dh);
        if (causal) scores = add(scores, causal_mask);
        Tensor attn = softmax_t(scores, 1.0);
        Tensor out = matmul(attn, v);
        heads = (h == 0) ? out : concat_cols(heads, out);
    }
    return add_bias(matmul(heads, param(prefix + ".out.w")), param(prefix + ".out.b"));
}

Tensor Model::decode(const Tensor& encoded, const std::vector<int>& y_in) const {
    if (y_in.empty() || y_in.front() != Vocabulary::kSos) {
        throw ShapeError("decode: input must begin with the start token");
    }
    if (static_cast<int>(y_in.size()) > cfg_.max_caption_len) {
        throw ShapeError("decode: input length " + std::to_string(y_in.size()) +
                         " exceeds max_caption_len " + std::to_string(cfg_.max_caption_len));
    }
    const int tw = static_cast<int>(y_in.size());
    const int d = cfg_.d_model;

    Tensor x = scale(embed_rows(param("dec.embed"), y_in), std::sqrt(static_cast<double>(d)));
    // Positional rows for the used prefix, as a constant.
    {
        std::vector<double> pe(static_cast<size_t>(tw) * d);
        std::copy_n(positional_.data().begin(), pe.size(), pe.begin());
        x = add(x, Tensor({tw, d}, std::move(pe)));
    }

    for (int b = 0; b < cfg_.n_decoder_blocks; ++b) {
        const std::string p = "dec.block" + std::to_string(b);
        Tensor sa = attention(x, x, p + ".self", /*causal=*/true);
        x = layer_norm(add(x, sa), param(p + ".ln1.gamma"), param(p + ".ln1.beta"));
        Tensor ca = attention(x, encoded, p + ".cross", /*causal=*/false);
        x = layer_norm(add(x, ca), param(p + ".ln2.gamma"), param(p + ".ln2.beta"));
        Tensor ff = add_bias(
            matmul(relu(add_bias(matmul(x, param(p + ".ffn.w1")), param(p + ".ffn.b1"))),
                   param(p + ".ffn.w2")),
            param(p + ".ffn.b2"));
        x = layer_norm(add(x, ff), param(p + ".ln3.gamma"), param(p + ".ln3.beta"));
    }
    return add_bias(matmul(x, param("dec.out.w")), param("dec.out.b"));
}

Tensor Model::forward(const Tensor& x, const std::vector<int>& y_in, double temperature) const {
    return softmax_t(decode(encode(x), y_in), temperature);
}

std::vector<int> Model::generate_greedy(const Tensor& x, int max_len) const {
    if (max_len < 2 || max_len > cfg_.max_caption_len) {
        throw ConfigError("generate_greedy: max_len must be in [2, max_caption_len]");
    }
    NoGradGuard no_grad;
    Tensor encoded = encode(x);
    std::vector<int> ids{Vocabulary::kSos};
    while (static_cast<int>(ids.size()) < max_len) {
        Tensor probs = softmax_t(decode(encoded, ids), cfg_.classifier_temperature);
        const int w = probs.dim(1);
        const int last = probs.dim(0) - 1;
        int best = 0;
        double best_p = probs.at({last, 0});
        for (int j = 1; j < w; ++j) {
            const double pj = probs.at({last, j});
            if (pj > best_p) {
                best_p = pj;
                best = j;
            }
        }
        ids.push_back(best);
        if (best == Vocabulary::kEos) break;
    }
    return ids;
}

}  // namespace lwf
