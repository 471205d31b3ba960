#include "lwf/losses.hpp"

#include <cmath>
#include <string>

#include "lwf/error.hpp"

namespace lwf {

namespace {

NodePtr result(std::vector<int> shape, std::vector<double> value, std::vector<NodePtr> parents,
               std::function<void(Node&)> bw, const char* opname) {
    if (debug_checks_enabled()) check_finite(value, opname);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (grad_enabled()) {
        bool rq = false;
        for (const auto& p : parents) rq = rq || p->requires_grad;
        if (rq) {
            n->requires_grad = true;
            n->parents = std::move(parents);
            n->backward_fn = std::move(bw);
        }
    }
    return n;
}

struct RowLayout {
    int rows;
    int cols;
};

RowLayout last_dim_rows(const Tensor& t, const char* op) {
    if (t.rank() < 1) throw ShapeError(std::string(op) + ": rank must be >= 1");
    const int cols = t.shape().back();
    const int rows = static_cast<int>(t.numel()) / cols;
    return {rows, cols};
}

std::vector<uint8_t> effective_mask(const std::vector<uint8_t>& mask, int rows, const char* op) {
    if (mask.empty()) return std::vector<uint8_t>(static_cast<size_t>(rows), 1);
    if (static_cast<int>(mask.size()) != rows) {
        throw ShapeError(std::string(op) + ": mask length " + std::to_string(mask.size()) +
                         " does not match " + std::to_string(rows) + " steps");
    }
    return mask;
}

int count_unmasked(const std::vector<uint8_t>& mask, const char* op) {
    int n = 0;
    for (uint8_t m : mask) n += (m != 0);
    if (n == 0) throw ShapeError(std::string(op) + ": mask leaves no steps to score");
    return n;
}

void check_row_stochastic(const Tensor& t, const char* op) {
    const auto [rows, cols] = last_dim_rows(t, op);
    const auto& v = t.node()->value;
    for (int i = 0; i < rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double p = v[static_cast<size_t>(i) * cols + j];
            if (p < 0.0) throw NumericError(std::string(op) + ": negative probability");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-6) {
            throw NumericError(std::string(op) + ": row " + std::to_string(i) +
                               " is not a probability vector (sum " + std::to_string(s) + ")");
        }
    }
}

}  // namespace

Tensor softmax_t(const Tensor& logits, double temperature) {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("softmax_t: temperature must be positive, got " +
                                    std::to_string(temperature));
    }
    const auto [rows, cols] = last_dim_rows(logits, "softmax_t");
    const auto& lv = logits.node()->value;
    std::vector<double> out(lv.size());
    for (int i = 0; i < rows; ++i) {
        const double* row = &lv[static_cast<size_t>(i) * cols];
        double* orow = &out[static_cast<size_t>(i) * cols];
        double mx = row[0] / temperature;
        for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j] / temperature);
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double e = std::exp(row[j] / temperature - mx);
            orow[j] = e;
            sum += e;
        }
        for (int j = 0; j < cols; ++j) orow[j] /= sum;
    }
    const int r = rows, c = cols;
    return Tensor(result(
        logits.shape(), std::move(out), {logits.node()},
        [r, c, temperature](Node& self) {
            if (!self.parents[0]->requires_grad) return;
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (int i = 0; i < r; ++i) {
                const double* y = &self.value[static_cast<size_t>(i) * c];
                const double* g = &self.grad[static_cast<size_t>(i) * c];
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += g[j] * y[j];
                double* pg = &p.grad[static_cast<size_t>(i) * c];
                for (int j = 0; j < c; ++j) pg[j] += y[j] * (g[j] - dot) / temperature;
            }
        },
        "softmax_t"));
}

Tensor cross_entropy_indices(const std::vector<int>& targets, const Tensor& probs,
                             const std::vector<uint8_t>& mask) {
    const auto [rows, cols] = last_dim_rows(probs, "cross_entropy");
    if (static_cast<int>(targets.size()) != rows) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " probability rows");
    }
    for (int y : targets) {
        if (y < 0 || y >= cols) {
            throw ShapeError("cross_entropy: target index " + std::to_string(y) + " out of range");
        }
    }
    if (debug_checks_enabled()) check_row_stochastic(probs, "cross_entropy");
    const auto m = effective_mask(mask, rows, "cross_entropy");
    const int n = count_unmasked(m, "cross_entropy");
    const auto& pv = probs.node()->value;
    double loss = 0.0;
    for (int i = 0; i < rows; ++i) {
        if (!m[static_cast<size_t>(i)]) continue;
        const double p = pv[static_cast<size_t>(i) * cols + targets[static_cast<size_t>(i)]];
        loss -= std::log(std::max(p, kLogFloor));
    }
    loss /= n;
    const int r = rows, c = cols;
    return Tensor(result(
        {1}, {loss}, {probs.node()},
        [r, c, n, targets, m](Node& self) {
            if (!self.parents[0]->requires_grad) return;
            Node& p = *self.parents[0];
            p.ensure_grad();
            const double g0 = self.grad[0];
            for (int i = 0; i < r; ++i) {
                if (!m[static_cast<size_t>(i)]) continue;
                const size_t idx =
                    static_cast<size_t>(i) * c + targets[static_cast<size_t>(i)];
                const double pi = p.value[idx];
                if (pi > kLogFloor) p.grad[idx] += g0 * (-1.0 / pi) / n;
            }
        },
        "cross_entropy"));
}

Tensor cross_entropy(const Tensor& target_onehot, const Tensor& probs,
                     const std::vector<uint8_t>& mask) {
    if (target_onehot.shape() != probs.shape()) {
        throw ShapeError("cross_entropy: target shape " + shape_str(target_onehot.shape()) +
                         " does not match probs " + shape_str(probs.shape()));
    }
    const auto [rows, cols] = last_dim_rows(probs, "cross_entropy");
    const auto& tv = target_onehot.node()->value;
    std::vector<int> targets(static_cast<size_t>(rows));
    for (int i = 0; i < rows; ++i) {
        int best = 0;
        double bv = tv[static_cast<size_t>(i) * cols];
        for (int j = 1; j < cols; ++j) {
            const double v = tv[static_cast<size_t>(i) * cols + j];
            if (v > bv) {
                bv = v;
                best = j;
            }
        }
        targets[static_cast<size_t>(i)] = best;
    }
    return cross_entropy_indices(targets, probs, mask);
}

Tensor kl_divergence(const Tensor& p_teacher, const Tensor& q_student,
                     const std::vector<uint8_t>& mask) {
    if (p_teacher.shape() != q_student.shape()) {
        throw ShapeError("kl_divergence: shape mismatch " + shape_str(p_teacher.shape()) +
                         " vs " + shape_str(q_student.shape()));
    }
    const auto [rows, cols] = last_dim_rows(q_student, "kl_divergence");
    if (debug_checks_enabled()) {
        check_row_stochastic(p_teacher, "kl_divergence(p)");
        check_row_stochastic(q_student, "kl_divergence(q)");
    }
    const auto m = effective_mask(mask, rows, "kl_divergence");
    const int n = count_unmasked(m, "kl_divergence");
    const auto& pv = p_teacher.node()->value;
    const auto& qv = q_student.node()->value;
    double loss = 0.0;
    for (int i = 0; i < rows; ++i) {
        if (!m[static_cast<size_t>(i)]) continue;
        for (int j = 0; j < cols; ++j) {
            const size_t idx = static_cast<size_t>(i) * cols + j;
            const double p = pv[idx];
            if (p <= 0.0) continue;
            loss += p * (std::log(std::max(p, kLogFloor)) - std::log(std::max(qv[idx], kLogFloor)));
        }
    }
    loss /= n;
    const int r = rows, c = cols;
    return Tensor(result(
        {1}, {loss}, {p_teacher.node(), q_student.node()},
        [r, c, n, m](Node& self) {
            const auto& pv = self.parents[0]->value;
            const auto& qv = self.parents[1]->value;
            const double g0 = self.grad[0];
            if (self.parents[0]->requires_grad) {
                Node& pp = *self.parents[0];
                pp.ensure_grad();
                for (int i = 0; i < r; ++i) {
                    if (!m[static_cast<size_t>(i)]) continue;
                    for (int j = 0; j < c; ++j) {
                        const size_t idx = static_cast<size_t>(i) * c + j;
                        const double p = pv[idx];
                        if (p <= 0.0) continue;
                        const double dterm = std::log(std::max(p, kLogFloor)) -
                                             std::log(std::max(qv[idx], kLogFloor)) +
                                             (p > kLogFloor ? 1.0 : 0.0);
                        pp.grad[idx] += g0 * dterm / n;
                    }
                }
            }
            if (self.parents[1]->requires_grad) {
                Node& pq = *self.parents[1];
                pq.ensure_grad();
                for (int i = 0; i < r; ++i) {
                    if (!m[static_cast<size_t>(i)]) continue;
                    for (int j = 0; j < c; ++j) {
                        const size_t idx = static_cast<size_t>(i) * c + j;
                        const double p = pv[idx];
                        const double q = qv[idx];
                        if (p <= 0.0 || q <= kLogFloor) continue;
                        pq.grad[idx] += g0 * (-p / q) / n;
                    }
                }
            }
        },
        "kl_divergence"));
}

}  // namespace lwf
