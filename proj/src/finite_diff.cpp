#include "lwf/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "lwf/error.hpp"

namespace lwf {

double finite_diff_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point,
                         double eps) {
    Tensor x = point.detached_copy();
    x.set_requires_grad(true);
    Tensor loss = fn(x);
    if (loss.numel() != 1) throw ShapeError("finite_diff_check: fn must return a scalar");
    backward(loss);
    const auto gspan = x.grad();
    const std::vector<double> analytic(gspan.begin(), gspan.end());

    Tensor probe = point.detached_copy();
    NoGradGuard no_grad;
    double worst = 0.0;
    for (size_t k = 0; k < probe.numel(); ++k) {
        const double orig = probe.data()[k];
        probe.mutable_data()[k] = orig + eps;
        const double fplus = fn(probe).item();
        probe.mutable_data()[k] = orig - eps;
        const double fminus = fn(probe).item();
        probe.mutable_data()[k] = orig;
        const double numeric = (fplus - fminus) / (2.0 * eps);
        const double rel = std::abs(analytic[k] - numeric) / std::max(std::abs(analytic[k]), 1e-8);
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace lwf
