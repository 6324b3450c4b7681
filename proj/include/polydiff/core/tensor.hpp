#pragma once

#include "polydiff/core/types.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace polydiff::core {

using Shape = std::vector<Index>;

/// Tensor storage. Over-aligned so vectorized kernels take the same path on
/// every buffer; otherwise reduction order, and hence the last bits of a
/// result, would depend on where the allocator placed the data.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

std::string to_string(const Shape& shape);
Index shape_size(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    Buffer value;
    Buffer grad;  // empty until the first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward;

    Buffer& ensure_grad();
};

}  // namespace detail

/// Dense row-major array with an optional reverse-mode tape entry.
///
/// Tensors of rank 1 are treated as a single row by every 2-D operation.
/// Copies share storage: a parameter handed to an operation and the entry in
/// its ParameterStore are the same node, so gradients land in one place.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from_data(Shape shape, const std::vector<double>& data, bool requires_grad = false);
    static Tensor from_buffer(Shape shape, Buffer data, bool requires_grad = false);
    static Tensor from_matrix(const Eigen::Ref<const Mat>& m, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    Index rank() const { return static_cast<Index>(node_->shape.size()); }
    Index rows() const;
    Index cols() const;
    Index size() const { return static_cast<Index>(node_->value.size()); }

    std::span<const double> data() const { return node_->value; }
    /// Writable view of the values; reserved for optimizers and the
    /// finite-difference harness, never for values already on a tape.
    std::span<double> mutable_data() { return node_->value; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->ensure_grad(); }
    void zero_grad() { node_->grad.clear(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    ConstMatMap matrix() const { return {node_->value.data(), rows(), cols()}; }
    Mat to_matrix() const { return matrix(); }
    double item() const;

    /// Seeds d(self)/d(self) = 1 and propagates through the recorded tape.
    /// Only scalar tensors may start a backward pass.
    void backward() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

/// True when new operations record themselves on the tape.
bool grad_enabled();

/// Disables tape recording for its lifetime (inference and finite differences).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {
/// Builds an operation result. The backward closure and parent links are
/// kept only if recording is on and some parent requires a gradient.
Tensor make_result(Shape shape, Buffer value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);
}  // namespace detail

}  // namespace polydiff::core
