#pragma once

#include <cstdint>
#include <vector>

#include "lwf/tensor.hpp"

namespace lwf {

// Floor applied to log arguments in the loss functions; keeps saturated
// outputs from producing -inf.
inline constexpr double kLogFloor = 1e-12;

// Temperature-scaled softmax over the last dimension. Equivalent to
// softmax(logits / temperature); temperature must be positive.
Tensor softmax_t(const Tensor& logits, double temperature);

// Masked cross-entropy, averaged over unmasked steps. probs: [T,W] rows of
// probabilities, targets: per-step class indices. An empty mask means all
// steps count.
Tensor cross_entropy_indices(const std::vector<int>& targets, const Tensor& probs,
                             const std::vector<uint8_t>& mask = {});

// One-hot form: target [T,W] rows with a single 1.
Tensor cross_entropy(const Tensor& target_onehot, const Tensor& probs,
                     const std::vector<uint8_t>& mask = {});

// Masked KL divergence KL(p || q) averaged over unmasked steps, teacher
// distribution first. Terms with p == 0 contribute 0; both log arguments
// are floored at kLogFloor, so KL(p, p) is exactly zero.
Tensor kl_divergence(const Tensor& p_teacher, const Tensor& q_student,
                     const std::vector<uint8_t>& mask = {});

}  // namespace lwf
