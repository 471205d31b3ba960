#include "lwf/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "lwf/error.hpp"

namespace lwf {

namespace {
bool g_debug_checks = false;
thread_local bool g_grad_enabled = true;
}  // namespace

bool debug_checks_enabled() { return g_debug_checks; }
void set_debug_checks(bool on) { g_debug_checks = on; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    n_ = std::make_shared<Node>();
    n_->shape = std::move(shape);
    n_->value = std::move(data);
    n_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), v);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor({1}, {v}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return n_->shape; }

int Tensor::dim(int i) const { return n_->shape.at(static_cast<size_t>(i)); }

int Tensor::rank() const { return static_cast<int>(n_->shape.size()); }

size_t Tensor::numel() const { return n_->value.size(); }

std::span<const double> Tensor::data() const { return n_->value; }

std::span<double> Tensor::mutable_data() { return n_->value; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() requires a scalar tensor, got " + shape_str(n_->shape));
    return n_->value[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
    if (idx.size() != n_->shape.size()) throw ShapeError("index rank mismatch in at()");
    size_t flat = 0;
    size_t i = 0;
    for (int v : idx) {
        if (v < 0 || v >= n_->shape[i]) throw ShapeError("index out of range in at()");
        flat = flat * static_cast<size_t>(n_->shape[i]) + static_cast<size_t>(v);
        ++i;
    }
    return n_->value[flat];
}

bool Tensor::requires_grad() const { return n_->requires_grad; }

void Tensor::set_requires_grad(bool on) { n_->requires_grad = on; }

bool Tensor::has_grad() const { return n_ && n_->grad.size() == n_->value.size(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw ShapeError("tensor has no gradient buffer");
    return n_->grad;
}

void Tensor::zero_grad() {
    n_->grad.assign(n_->value.size(), 0.0);
}

Tensor Tensor::detached_copy(bool requires_grad) const {
    return Tensor(n_->shape, n_->value, requires_grad);
}

ComputationGraph ComputationGraph::build(const Tensor& root) {
    ComputationGraph g;
    g.root_ = root.node();
    if (!g.root_) throw ShapeError("cannot build a graph from an undefined tensor");

    // Iterative postorder DFS over parent links. Nodes without recorded
    // parents (leaves, no-grad results) terminate the walk.
    std::unordered_set<const Node*> visited;
    std::vector<std::pair<NodePtr, size_t>> stack;
    stack.emplace_back(g.root_, 0);
    visited.insert(g.root_.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            NodePtr child = node->parents[next_child];
            ++next_child;
            if (visited.insert(child.get()).second) {
                stack.emplace_back(std::move(child), 0);
            }
        } else {
            g.order_.push_back(node);
            stack.pop_back();
        }
    }
    return g;
}

void ComputationGraph::run_backward() {
    if (!root_ || root_->numel() != 1) {
        throw ShapeError("backward requires a scalar root tensor");
    }
    root_->ensure_grad();
    root_->grad[0] += 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node& n = **it;
        if (n.backward_fn) {
            n.ensure_grad();
            n.backward_fn(n);
        }
    }
}

void backward(const Tensor& loss) {
    ComputationGraph::build(loss).run_backward();
}

void check_finite(std::span<const double> values, const char* where) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value detected in ") + where);
        }
    }
}

uint64_t fnv1a64(const void* p, size_t n, uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace lwf
