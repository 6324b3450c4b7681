#include "polydiff/core/tensor.hpp"

#include "polydiff/core/error.hpp"

#include <numeric>
#include <sstream>
#include <unordered_set>

namespace polydiff::core {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    return os.str();
}

Index shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

Buffer& detail::Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const Index n = shape_size(shape);
    return from_buffer(std::move(shape), Buffer(static_cast<std::size_t>(n), 0.0), requires_grad);
}

Tensor Tensor::from_data(Shape shape, const std::vector<double>& data, bool requires_grad) {
    return from_buffer(std::move(shape), Buffer(data.begin(), data.end()), requires_grad);
}

Tensor Tensor::from_buffer(Shape shape, Buffer data, bool requires_grad) {
    if (shape.empty() || shape.size() > 2)
        throw DimensionError("tensor rank must be 1 or 2, got shape [" + to_string(shape) + "]");
    for (Index e : shape)
        if (e <= 0) throw DimensionError("tensor extents must be positive: [" + to_string(shape) + "]");
    if (shape_size(shape) != static_cast<Index>(data.size()))
        throw DimensionError("shape [" + to_string(shape) + "] does not match " +
                             std::to_string(data.size()) + " values");
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const Mat>& m, bool requires_grad) {
    Buffer data(static_cast<std::size_t>(m.size()));
    MatMap(data.data(), m.rows(), m.cols()) = m;
    return from_buffer({m.rows(), m.cols()}, std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v) { return from_buffer({1}, Buffer{v}); }

Index Tensor::rows() const { return rank() == 1 ? 1 : node_->shape[0]; }
Index Tensor::cols() const { return node_->shape.back(); }

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape [" + to_string(shape()) + "]");
    return node_->value[0];
}

void Tensor::backward() const {
    if (size() != 1) throw DimensionError("backward() needs a scalar, got [" + to_string(shape()) + "]");

    // Iterative post-order DFS; the reverse of the post-order is a valid
    // topological order from the output back to the leaves.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor detail::make_result(Shape shape, Buffer value, std::vector<Tensor> parents,
                           std::function<void(Node&)> backward) {
    Tensor out = Tensor::from_buffer(std::move(shape), std::move(value));
    if (!g_grad_enabled) return out;
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (!any) return out;
    auto& node = *out.node();
    node.requires_grad = true;
    node.parents.reserve(parents.size());
    for (auto& p : parents) node.parents.push_back(p.node());
    node.backward = std::move(backward);
    return out;
}

}  // namespace polydiff::core
