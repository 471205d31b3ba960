#include "lwf/adam.hpp"

#include <cmath>
#include <string>

#include "lwf/error.hpp"

namespace lwf {

void AdamConfig::validate() const {
    if (!(alpha > 0.0)) throw ConfigError("adam: alpha must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("adam: eps must be positive");
}

AdamState AdamState::init(std::span<const Tensor> params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor& p : params) {
        s.m.emplace_back(p.numel(), 0.0);
        s.v.emplace_back(p.numel(), 0.0);
    }
    return s;
}

bool AdamState::matches(std::span<const Tensor> params) const {
    if (m.size() != params.size() || v.size() != params.size()) return false;
    for (size_t i = 0; i < params.size(); ++i) {
        if (m[i].size() != params[i].numel() || v[i].size() != params[i].numel()) return false;
    }
    return true;
}

void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config) {
    config.validate();
    if (!state.matches({params.data(), params.size()})) {
        throw Error("adam: optimizer state does not match the parameter list");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (!p.has_grad()) {
            throw Error("adam: parameter " + std::to_string(i) +
                        " has no gradient; run backward() before stepping");
        }
        const auto& g = p.node()->grad;
        auto& val = p.node()->value;
        auto& mi = state.m[i];
        auto& vi = state.v[i];
        for (size_t k = 0; k < val.size(); ++k) {
            mi[k] = config.beta1 * mi[k] + (1.0 - config.beta1) * g[k];
            vi[k] = config.beta2 * vi[k] + (1.0 - config.beta2) * g[k] * g[k];
            const double mhat = mi[k] / bc1;
            const double vhat = vi[k] / bc2;
            val[k] -= config.alpha * mhat / (std::sqrt(vhat) + config.eps);
        }
    }
}

}  // namespace lwf
