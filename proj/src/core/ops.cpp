#include "polydiff/core/ops.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/core/kernels.hpp"

#include <cmath>

namespace polydiff::core {

using detail::make_result;
using detail::Node;

namespace {

MatMap value_map(Node& n, Index rows, Index cols) { return {n.value.data(), rows, cols}; }
MatMap grad_map(Node& n, Index rows, Index cols) { return {n.ensure_grad().data(), rows, cols}; }

Index node_rows(const Node& n) { return n.shape.size() == 1 ? 1 : n.shape[0]; }
Index node_cols(const Node& n) { return n.shape.back(); }

MatMap value_of(Node& n) { return value_map(n, node_rows(n), node_cols(n)); }
MatMap grad_of(Node& n) { return grad_map(n, node_rows(n), node_cols(n)); }
ConstMatMap self_grad(Node& n) { return {n.grad.data(), node_rows(n), node_cols(n)}; }

Shape shape2(Index r, Index c) { return {r, c}; }

Buffer buffer(const Eigen::Ref<const Mat>& m) {
    Buffer v(static_cast<std::size_t>(m.size()));
    MatMap(v.data(), m.rows(), m.cols()) = m;
    return v;
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shapes [" + to_string(a.shape()) + "] and [" +
                             to_string(b.shape()) + "] differ");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: [" + to_string(a.shape()) + "] x [" + to_string(b.shape()) + "]");
    Mat out = a.matrix() * b.matrix();
    const Index n = a.rows(), k = a.cols(), m = b.cols();
    return make_result(shape2(n, m), buffer(out), {a, b}, [n, k, m](Node& self) {
        ConstMatMap g = self_grad(self);
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) grad_map(pa, n, k).noalias() += g * value_map(pb, k, m).transpose();
        if (pb.requires_grad) grad_map(pb, k, m).noalias() += value_map(pa, n, k).transpose() * g;
    });
}

Tensor transpose(const Tensor& a) {
    Mat out = a.matrix().transpose();
    return make_result(shape2(a.cols(), a.rows()), buffer(out), {a}, [](Node& self) {
        grad_of(*self.parents[0]) += self_grad(self).transpose();
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    Mat out = a.matrix() + b.matrix();
    return make_result(a.shape(), buffer(out), {a, b}, [](Node& self) {
        for (auto& p : self.parents)
            if (p->requires_grad) grad_of(*p) += self_grad(self);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same(a, b, "sub");
    Mat out = a.matrix() - b.matrix();
    return make_result(a.shape(), buffer(out), {a, b}, [](Node& self) {
        if (self.parents[0]->requires_grad) grad_of(*self.parents[0]) += self_grad(self);
        if (self.parents[1]->requires_grad) grad_of(*self.parents[1]) -= self_grad(self);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same(a, b, "mul");
    Mat out = a.matrix().cwiseProduct(b.matrix());
    return make_result(a.shape(), buffer(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) grad_of(pa) += self_grad(self).cwiseProduct(value_of(pb));
        if (pb.requires_grad) grad_of(pb) += self_grad(self).cwiseProduct(value_of(pa));
    });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols())
        throw DimensionError("add_row: bias [" + to_string(bias.shape()) + "] vs input [" +
                             to_string(a.shape()) + "]");
    Mat out = a.matrix().rowwise() + bias.matrix().row(0);
    return make_result(a.shape(), buffer(out), {a, bias}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) grad_of(pa) += self_grad(self);
        if (pb.requires_grad) grad_of(pb) += self_grad(self).colwise().sum();
    });
}

Tensor scale(const Tensor& a, double s) {
    Mat out = a.matrix() * s;
    return make_result(a.shape(), buffer(out), {a}, [s](Node& self) {
        grad_of(*self.parents[0]) += s * self_grad(self);
    });
}

Tensor softmax_rows(const Tensor& a) {
    Mat out = a.matrix();
    for (Index i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
    }
    return make_result(a.shape(), buffer(out), {a}, [](Node& self) {
        MatMap y = value_of(self);
        ConstMatMap g = self_grad(self);
        // dx = y * (g - <g, y>) per row
        Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
        Mat dx = y.cwiseProduct(g - dots.replicate(1, y.cols()));
        grad_of(*self.parents[0]) += dx;
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    const Index n = x.rows(), d = x.cols();
    if (gain.size() != d || bias.size() != d)
        throw DimensionError("layer_norm: gain/bias width differs from input width " + std::to_string(d));
    ConstMatMap xm = x.matrix();
    Mat xhat(n, d);
    Eigen::VectorXd inv_std(n);
    for (Index i = 0; i < n; ++i) {
        const double mu = xm.row(i).mean();
        const double var = (xm.row(i).array() - mu).square().mean();
        inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(i) = (xm.row(i).array() - mu) * inv_std[i];
    }
    Mat out = (xhat.array().rowwise() * gain.matrix().row(0).array()).rowwise() +
              bias.matrix().row(0).array();
    return make_result(x.shape(), buffer(out), {x, gain, bias},
                       [xhat = std::move(xhat), inv_std = std::move(inv_std), n, d](Node& self) {
                           ConstMatMap g = self_grad(self);
                           Node& px = *self.parents[0];
                           Node& pg = *self.parents[1];
                           Node& pb = *self.parents[2];
                           if (pg.requires_grad)
                               grad_map(pg, 1, d) += g.cwiseProduct(xhat).colwise().sum();
                           if (pb.requires_grad) grad_map(pb, 1, d) += g.colwise().sum();
                           if (px.requires_grad) {
                               RowVec gain_row = value_map(pg, 1, d);
                               MatMap gx = grad_map(px, n, d);
                               for (Index i = 0; i < n; ++i) {
                                   RowVec gh = g.row(i).cwiseProduct(gain_row);
                                   const double m1 = gh.mean();
                                   const double m2 = gh.cwiseProduct(xhat.row(i)).mean();
                                   gx.row(i).array() +=
                                       inv_std[i] * (gh.array() - m1 - xhat.row(i).array() * m2);
                               }
                           }
                       });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
    Mat x = a.matrix();
    Mat out = x;
    kernels::gelu_inplace(out);
    return make_result(a.shape(), buffer(out), {a}, [x = std::move(x)](Node& self) {
        Mat dydx = x.unaryExpr([](double v) {
            const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
            return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        });
        grad_of(*self.parents[0]) += self_grad(self).cwiseProduct(dydx);
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
    const Index d = parts.front().cols();
    Index total = 0;
    for (const auto& p : parts) {
        if (p.cols() != d) throw DimensionError("concat_rows: column counts differ");
        total += p.rows();
    }
    Mat out(total, d);
    std::vector<Index> offsets;
    Index r = 0;
    for (const auto& p : parts) {
        offsets.push_back(r);
        out.middleRows(r, p.rows()) = p.matrix();
        r += p.rows();
    }
    return make_result(shape2(total, d), buffer(out), parts,
                       [offsets = std::move(offsets), d](Node& self) {
                           ConstMatMap g = self_grad(self);
                           for (std::size_t i = 0; i < self.parents.size(); ++i) {
                               Node& p = *self.parents[i];
                               if (!p.requires_grad) continue;
                               const Index rows = node_rows(p);
                               grad_map(p, rows, d) += g.middleRows(offsets[i], rows);
                           }
                       });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
    const Index n = parts.front().rows();
    Index total = 0;
    for (const auto& p : parts) {
        if (p.rows() != n) throw DimensionError("concat_cols: row counts differ");
        total += p.cols();
    }
    Mat out(n, total);
    std::vector<Index> offsets;
    Index c = 0;
    for (const auto& p : parts) {
        offsets.push_back(c);
        out.middleCols(c, p.cols()) = p.matrix();
        c += p.cols();
    }
    return make_result(shape2(n, total), buffer(out), parts,
                       [offsets = std::move(offsets), n](Node& self) {
                           ConstMatMap g = self_grad(self);
                           for (std::size_t i = 0; i < self.parents.size(); ++i) {
                               Node& p = *self.parents[i];
                               if (!p.requires_grad) continue;
                               const Index cols = node_cols(p);
                               grad_map(p, n, cols) += g.middleCols(offsets[i], cols);
                           }
                       });
}

Tensor slice_rows(const Tensor& a, Index begin, Index count) {
    if (begin < 0 || count <= 0 || begin + count > a.rows())
        throw DimensionError("slice_rows: range out of bounds");
    Mat out = a.matrix().middleRows(begin, count);
    return make_result(shape2(count, a.cols()), buffer(out), {a}, [begin, count](Node& self) {
        grad_of(*self.parents[0]).middleRows(begin, count) += self_grad(self);
    });
}

Tensor slice_cols(const Tensor& a, Index begin, Index count) {
    if (begin < 0 || count <= 0 || begin + count > a.cols())
        throw DimensionError("slice_cols: range out of bounds");
    Mat out = a.matrix().middleCols(begin, count);
    return make_result(shape2(a.rows(), count), buffer(out), {a}, [begin, count](Node& self) {
        grad_of(*self.parents[0]).middleCols(begin, count) += self_grad(self);
    });
}

Tensor sum(const Tensor& a) {
    return make_result({1}, {a.matrix().sum()}, {a}, [](Node& self) {
        grad_of(*self.parents[0]).array() += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    return make_result({1}, {a.matrix().mean()}, {a}, [inv](Node& self) {
        grad_of(*self.parents[0]).array() += self.grad[0] * inv;
    });
}

Tensor abs(const Tensor& a) {
    Mat out = a.matrix().cwiseAbs();
    return make_result(a.shape(), buffer(out), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        Mat sign = value_of(p).unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
        grad_of(p) += self_grad(self).cwiseProduct(sign);
    });
}

Tensor square(const Tensor& a) {
    Mat out = a.matrix().array().square();
    return make_result(a.shape(), buffer(out), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        grad_of(p) += 2.0 * self_grad(self).cwiseProduct(value_of(p));
    });
}

}  // namespace polydiff::core
