#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lwf/tensor.hpp"

namespace lwf {

// Bias-corrected Adam. Defaults follow the original recommendation
// (step size 1e-3, decay rates 0.9 / 0.999, epsilon 1e-8).
struct AdamConfig {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    bool operator==(const AdamConfig&) const = default;
    void validate() const;
};

// First/second-moment accumulators, one slot per parameter tensor.
// `t` counts completed update steps and drives bias correction.
struct AdamState {
    uint64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState init(std::span<const Tensor> params);

    // True when the slot count and per-slot sizes match `params`.
    bool matches(std::span<const Tensor> params) const;
};

// One in-place Adam update over `params` using their accumulated gradients.
// Every parameter must have a gradient buffer (i.e. backward() has run);
// a missing gradient is reported as an Error rather than silently skipped.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config);

}  // namespace lwf
