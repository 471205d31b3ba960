#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lwf/tensor.hpp"

namespace lwf {

// Architecture description. The parameter set is a pure function of this
// struct, so equal configs always produce identical parameter names and
// shapes.
struct ModelConfig {
    int n_mels = 64;
    int d_model = 64;
    int n_temporal_blocks = 4;
    std::vector<int> dilation_schedule = {1, 2, 4, 8};
    int n_tf_blocks = 2;
    int n_decoder_blocks = 3;
    int n_heads = 4;
    int vocab_size = 0;  // set from the training vocabulary
    int max_caption_len = 22;
    double classifier_temperature = 1.0;

    void validate() const;
    bool operator==(const ModelConfig& other) const;
};

// Channel count used inside the time-frequency encoder blocks.
inline constexpr int kTfChannels = 4;
// Kernel length of the temporal gated convolutions.
inline constexpr int kTemporalKernel = 3;
// Spatial kernel of the depthwise convolutions (time x frequency).
inline constexpr int kTfKernel = 3;

// Residual gated dilated convolution: h + tanh(conv_f(h)) * sigmoid(conv_g(h)).
Tensor gated_conv_block(const Tensor& h, const Tensor& filter_w, const Tensor& filter_b,
                        const Tensor& gate_w, const Tensor& gate_b, int dilation);

// Depthwise (per-channel spatial) convolution followed by a pointwise
// (1x1) channel mix and a ReLU. x: [T, F, C_in] -> [T, F, C_out].
Tensor depthwise_separable_block(const Tensor& x, const Tensor& dw_w, const Tensor& dw_b,
                                 const Tensor& pw_w, const Tensor& pw_b);

// Sinusoidal positional encoding table, [max_len, d_model].
Tensor sinusoidal_positional_encoding(int max_len, int d_model);

// Encoder-decoder captioning model: a temporal branch of gated dilated
// convolutions and a time-frequency branch of depthwise-separable
// convolutions feed a merge projection; a causal transformer decoder with
// cross-attention emits per-step vocabulary logits through one classifier
// matrix shared across time.
class Model {
public:
    Model(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // Deep copy: identical config, bitwise-equal parameter values, fully
    // independent storage.
    Model clone() const;

    // Ordered parameter access (iteration order is fixed by construction).
    size_t param_count_tensors() const { return params_.size(); }
    size_t param_count_scalars() const;
    const std::vector<std::string>& param_names() const { return names_; }
    const Tensor& param(const std::string& name) const;
    Tensor& mutable_param(const std::string& name);
    std::span<Tensor> params() { return {params_.data(), params_.size()}; }
    std::span<const Tensor> params() const { return {params_.data(), params_.size()}; }

    void set_trainable(bool on);
    void zero_grad();

    // FNV-1a over parameter names and raw 64-bit values, order-sensitive.
    uint64_t param_hash() const;

    // Replace parameter values by name; shapes must match exactly.
    void load_param_values(const std::vector<std::pair<std::string, std::vector<double>>>& named);
    // Snapshot of all parameter values, in declaration order.
    std::vector<std::pair<std::string, std::vector<double>>> dump_param_values() const;

    // X: [T_a, n_mels] -> [T_a, d_model]; length-preserving.
    Tensor encode_temporal(const Tensor& x) const;
    Tensor encode_tf(const Tensor& x) const;
    // Concatenate both encodings and project back to d_model with a ReLU.
    Tensor merge(const Tensor& h_temporal, const Tensor& h_tf) const;
    // Full audio encoder: merge(encode_temporal(x), encode_tf(x)).
    Tensor encode(const Tensor& x) const;

    // Teacher-forced decoding. y_in must start with the start token and
    // respect max_caption_len; returns [len(y_in), vocab_size] logits.
    Tensor decode(const Tensor& encoded, const std::vector<int>& y_in) const;

    // softmax_t(decode(encode(x), y_in), temperature): rows of per-step
    // next-token probabilities.
    Tensor forward(const Tensor& x, const std::vector<int>& y_in, double temperature) const;

    // Greedy decoding at temperature 1: argmax per step (lowest index on
    // ties), stop at the end token or when the sequence reaches max_len
    // tokens. The returned sequence includes the start token.
    std::vector<int> generate_greedy(const Tensor& x, int max_len) const;

private:
    Tensor& add_param(const std::string& name, std::vector<int> shape, class Rng& rng,
                      int fan_in, int fan_out);
    Tensor& add_zeros(const std::string& name, std::vector<int> shape);
    Tensor attention(const Tensor& queries_from, const Tensor& keys_from,
                     const std::string& prefix, bool causal) const;

    ModelConfig cfg_;
    std::vector<std::string> names_;
    std::vector<Tensor> params_;
    std::unordered_map<std::string, size_t> index_;
    Tensor positional_;  // [max_caption_len, d_model], constant
};

}  // namespace lwf
