#pragma once

#include <functional>

#include "lwf/tensor.hpp"

namespace lwf {

// Numeric gradient check for a scalar-valued function of one tensor.
//
// `fn` must build a fresh graph from its argument and return a scalar.
// The analytic gradient at `point` is obtained via backward(); each
// coordinate is then compared against the central difference
// (f(x+eps·e_k) − f(x−eps·e_k)) / (2·eps). Returns the maximum over
// coordinates of |analytic − numeric| / max(|analytic|, 1e-8).
double finite_diff_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point,
                         double eps = 1e-5);

}  // namespace lwf
