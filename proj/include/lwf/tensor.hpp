#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lwf {

// Runtime verification switch. When on, every op checks its output for
// NaN/Inf and loss ops validate their probability inputs.
bool debug_checks_enabled();
void set_debug_checks(bool on);

// Thread-local gradient recording switch (teacher forwards and greedy
// decoding run with it off, so no graph is built).
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// One recorded operation result. `parents` and `backward_fn` are populated
// only when the node participates in differentiation; leaves have
// requires_grad set but no backward_fn.
struct Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    size_t numel() const { return value.size(); }
    void ensure_grad();
};

using NodePtr = std::shared_ptr<Node>;

size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Value-semantics handle to a graph node. Copies share storage; `clone`
// in ParamMap makes deep copies where independence matters.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : n_(std::move(n)) {}
    Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return n_ != nullptr; }
    const std::vector<int>& shape() const;
    int dim(int i) const;
    int rank() const;
    size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;  // requires numel() == 1
    double at(std::initializer_list<int> idx) const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();  // allocates if needed

    // Deep copy of the value (no graph history carried over).
    Tensor detached_copy(bool requires_grad = false) const;

    NodePtr node() const { return n_; }

private:
    NodePtr n_;
};

// Topologically ordered record of the operations reachable from a root,
// with parent links; replays the backward pass visiting each node once.
class ComputationGraph {
public:
    static ComputationGraph build(const Tensor& root);

    // Seeds the root gradient with 1 and accumulates into every
    // requires_grad tensor in the graph. Root must be scalar.
    void run_backward();

    size_t size() const { return order_.size(); }
    const std::vector<NodePtr>& order() const { return order_; }

private:
    NodePtr root_;
    std::vector<NodePtr> order_;  // postorder: parents before consumers
};

// Convenience wrapper: build the graph for `loss` and run backward.
void backward(const Tensor& loss);

void check_finite(std::span<const double> values, const char* where);

// FNV-1a over raw bytes; used for frozen-parameter hashing.
uint64_t fnv1a64(const void* p, size_t n, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace lwf
