#include "drin/tape.hpp"

#include <cmath>

#include "drin/kernels.hpp"

namespace drin {

std::string to_string(Activation kind) {
    return kind == Activation::tanh ? "tanh" : "leaky_relu";
}

Activation parse_activation(const std::string& name) {
    if (name == "tanh") {
        return Activation::tanh;
    }
    if (name == "leaky_relu") {
        return Activation::leaky_relu;
    }
    throw ConfigError("unknown activation '" + name + "' (expected tanh or leaky_relu)");
}

namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
}

void require_matrix(const Shape& s, const char* op) {
    if (s.size() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(s));
    }
}

} // namespace

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
    if (v.id >= nodes_.size()) {
        throw ContractError("variable does not belong to this tape");
    }
    return nodes_[v.id];
}

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
    if (v.id >= nodes_.size()) {
        throw ContractError("variable does not belong to this tape");
    }
    return nodes_[v.id];
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
    return leaf(std::move(value), false);
}

template <typename T>
Var Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
    Node& n = nodes_.emplace_back();
    n.owned_value = std::move(value);
    n.value = &n.owned_value;
    n.requires_grad = requires_grad;
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::parameter(const Tensor<T>& value, Tensor<T>* grad_sink) {
    Node& n = nodes_.emplace_back();
    n.value = &value;
    if (grad_sink != nullptr) {
        if (grad_sink->shape() != value.shape()) {
            *grad_sink = Tensor<T>(value.shape());
        }
        n.grad = grad_sink;
        n.grad_allocated = true;
        n.requires_grad = true;
    }
    return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T> Tape<T>::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad_allocated) {
        return *n.grad;
    }
    return Tensor<T>(n.value->shape());
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var v) {
    Node& n = node(v);
    if (!n.grad_allocated) {
        n.owned_grad = Tensor<T>(n.value->shape());
        n.grad = &n.owned_grad;
        n.grad_allocated = true;
    }
    return *n.grad;
}

template <typename T>
Var Tape<T>::push_op(Tensor<T> value, std::initializer_list<Var> parents, BackwardFn backward) {
    bool rg = false;
    for (Var p : parents) {
        rg = rg || node(p).requires_grad;
    }
    return push_op(std::move(value), rg, std::move(backward));
}

template <typename T>
Var Tape<T>::push_op(Tensor<T> value, bool requires_grad, BackwardFn backward) {
    Node& n = nodes_.emplace_back();
    n.owned_value = std::move(value);
    n.value = &n.owned_value;
    n.is_leaf = false;
    n.requires_grad = requires_grad;
    if (requires_grad) {
        n.backward = std::move(backward);
    }
    return Var{nodes_.size() - 1};
}

template <typename T>
void Tape<T>::backward(Var loss) {
    const Node& root = node(loss);
    if (root.value->size() != 1) {
        throw ContractError("backward() needs a scalar root, got shape " + shape_str(root.value->shape()));
    }
    if (!root.requires_grad) {
        return;
    }
    for (Node& n : nodes_) {
        if (!n.is_leaf && n.grad_allocated) {
            n.grad->fill(T{0});
        }
    }
    grad_buffer(loss)[0] += T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.is_leaf || !n.requires_grad || !n.grad_allocated) {
            continue;
        }
        n.backward(*this, Var{i}, *n.grad);
    }
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    require_matrix(av.shape(), "matmul");
    require_matrix(bv.shape(), "matmul");
    if (av.cols() != bv.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(av.shape()) + " * " +
                         shape_str(bv.shape()));
    }
    const std::size_t m = av.rows(), k = av.cols(), p = bv.cols();
    Tensor<T> out(Shape{m, p});
    kernels::matmul<T>(av.data(), bv.data(), out.data(), m, k, p, false);
    return push_op(std::move(out), {a, b}, [a, b, m, k, p](Tape& t, Var, const Tensor<T>& g) {
        if (t.requires_grad(a)) {
            kernels::matmul_nt<T>(g.data(), t.value(b).data(), t.grad_buffer(a).data(), m, p, k, true);
        }
        if (t.requires_grad(b)) {
            kernels::matmul_tn<T>(t.value(a).data(), g.data(), t.grad_buffer(b).data(), k, m, p, true);
        }
    });
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    require_matrix(av.shape(), "matmul_nt");
    require_matrix(bv.shape(), "matmul_nt");
    if (av.cols() != bv.cols()) {
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_str(av.shape()) + " * " +
                         shape_str(bv.shape()) + "^T");
    }
    const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
    Tensor<T> out(Shape{m, n});
    kernels::matmul_nt<T>(av.data(), bv.data(), out.data(), m, k, n, false);
    return push_op(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, Var, const Tensor<T>& g) {
        if (t.requires_grad(a)) {
            kernels::matmul<T>(g.data(), t.value(b).data(), t.grad_buffer(a).data(), m, n, k, true);
        }
        if (t.requires_grad(b)) {
            kernels::matmul_tn<T>(g.data(), t.value(a).data(), t.grad_buffer(b).data(), n, m, k, true);
        }
    });
}

template <typename T>
Var Tape<T>::propagate(Var adj, Var x) {
    const Tensor<T>& av = value(adj);
    const Tensor<T>& xv = value(x);
    require_matrix(av.shape(), "propagate");
    require_matrix(xv.shape(), "propagate");
    if (av.rows() != av.cols() || av.cols() != xv.rows()) {
        throw ShapeError("propagate: adjacency " + shape_str(av.shape()) + " incompatible with features " +
                         shape_str(xv.shape()));
    }
    const std::size_t n = xv.rows(), d = xv.cols();
    Tensor<T> out(Shape{n, d});
    kernels::propagate<T>(av.data(), xv.data(), out.data(), n, d);
    return push_op(std::move(out), {adj, x}, [adj, x, n, d](Tape& t, Var, const Tensor<T>& g) {
        if (t.requires_grad(adj)) {
            kernels::matmul_nt<T>(g.data(), t.value(x).data(), t.grad_buffer(adj).data(), n, d, n, true);
        }
        if (t.requires_grad(x)) {
            kernels::matmul_tn<T>(t.value(adj).data(), g.data(), t.grad_buffer(x).data(), n, n, d, true);
        }
    });
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    require_same_shape(av.shape(), bv.shape(), "add");
    Tensor<T> out = av;
    auto od = out.data();
    auto bd = bv.data();
    for (std::size_t i = 0; i < od.size(); ++i) {
        od[i] += bd[i];
    }
    return push_op(std::move(out), {a, b}, [a, b](Tape& t, Var, const Tensor<T>& g) {
        for (Var p : {a, b}) {
            if (t.requires_grad(p)) {
                auto pd = t.grad_buffer(p).data();
                for (std::size_t i = 0; i < pd.size(); ++i) {
                    pd[i] += g[i];
                }
            }
        }
    });
}

template <typename T>
Var Tape<T>::sub(Var a, Var b) {
    return add(a, scale(b, T{-1}));
}

template <typename T>
Var Tape<T>::scale(Var a, T factor) {
    Tensor<T> out = value(a);
    for (T& x : out.data()) {
        x *= factor;
    }
    return push_op(std::move(out), {a}, [a, factor](Tape& t, Var, const Tensor<T>& g) {
        auto pd = t.grad_buffer(a).data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
            pd[i] += factor * g[i];
        }
    });
}

template <typename T>
Var Tape<T>::add_scalar(Var a, T offset) {
    Tensor<T> out = value(a);
    for (T& x : out.data()) {
        x += offset;
    }
    return push_op(std::move(out), {a}, [a](Tape& t, Var, const Tensor<T>& g) {
        auto pd = t.grad_buffer(a).data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
            pd[i] += g[i];
        }
    });
}

template <typename T>
Var Tape<T>::mask(Var a, const Tensor<T>& m) {
    require_same_shape(value(a).shape(), m.shape(), "mask");
    Tensor<T> out = value(a);
    auto md = m.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) {
        od[i] *= md[i];
    }
    return push_op(std::move(out), {a}, [a, m](Tape& t, Var, const Tensor<T>& g) {
        auto pd = t.grad_buffer(a).data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
            pd[i] += m[i] * g[i];
        }
    });
}

template <typename T>
Var Tape<T>::activation(Var a, Activation kind) {
    Tensor<T> out = value(a);
    const T slope = static_cast<T>(kLeakySlope);
    for (T& x : out.data()) {
        x = kind == Activation::tanh ? std::tanh(x) : (x >= T{0} ? x : slope * x);
    }
    return push_op(std::move(out), {a}, [a, kind, slope](Tape& t, Var self, const Tensor<T>& g) {
        auto pd = t.grad_buffer(a).data();
        if (kind == Activation::tanh) {
            const Tensor<T>& y = t.value(self);
            for (std::size_t i = 0; i < pd.size(); ++i) {
                pd[i] += g[i] * (T{1} - y[i] * y[i]);
            }
        } else {
            const Tensor<T>& x = t.value(a);
            for (std::size_t i = 0; i < pd.size(); ++i) {
                pd[i] += g[i] * (x[i] >= T{0} ? T{1} : slope);
            }
        }
    });
}

template <typename T>
Var Tape<T>::hinge(Var a) {
    Tensor<T> out = value(a);
    for (T& x : out.data()) {
        x = x > T{0} ? x : T{0};
    }
    return push_op(std::move(out), {a}, [a](Tape& t, Var, const Tensor<T>& g) {
        const Tensor<T>& x = t.value(a);
        auto pd = t.grad_buffer(a).data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
            if (x[i] > T{0}) {
                pd[i] += g[i];
            }
        }
    });
}

template <typename T>
Var Tape<T>::sum(Var a) {
    T acc{0};
    for (T x : value(a).data()) {
        acc += x;
    }
    return push_op(Tensor<T>::scalar(acc), {a}, [a](Tape& t, Var, const Tensor<T>& g) {
        const T g0 = g[0];
        for (T& x : t.grad_buffer(a).data()) {
            x += g0;
        }
    });
}

template <typename T>
Var Tape<T>::row(Var a, std::size_t i) {
    const Tensor<T>& av = value(a);
    require_matrix(av.shape(), "row");
    if (i >= av.rows()) {
        throw ShapeError("row: index " + std::to_string(i) + " out of range for " + shape_str(av.shape()));
    }
    auto src = av.row(i);
    Tensor<T> out(Shape{av.cols()}, std::vector<T>(src.begin(), src.end()));
    return push_op(std::move(out), {a}, [a, i](Tape& t, Var, const Tensor<T>& g) {
        auto dst = t.grad_buffer(a).row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) {
            dst[j] += g[j];
        }
    });
}

template <typename T>
Var Tape<T>::pick(Var a, std::size_t i) {
    const Tensor<T>& av = value(a);
    if (av.rank() != 1 || i >= av.size()) {
        throw ShapeError("pick: index " + std::to_string(i) + " invalid for " + shape_str(av.shape()));
    }
    return push_op(Tensor<T>::scalar(av[i]), {a}, [a, i](Tape& t, Var, const Tensor<T>& g) {
        t.grad_buffer(a)[i] += g[0];
    });
}

template <typename T>
Var Tape<T>::stack(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("stack: no parts");
    }
    const Shape inner = value(parts[0]).shape();
    const std::size_t chunk = shape_size(inner);
    Shape shape{parts.size()};
    shape.insert(shape.end(), inner.begin(), inner.end());
    std::vector<T> data;
    data.reserve(chunk * parts.size());
    bool rg = false;
    for (Var p : parts) {
        require_same_shape(value(p).shape(), inner, "stack");
        auto d = value(p).data();
        data.insert(data.end(), d.begin(), d.end());
        rg = rg || requires_grad(p);
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push_op(Tensor<T>(std::move(shape), std::move(data)), rg,
                   [ps, chunk](Tape& t, Var, const Tensor<T>& g) {
                       for (std::size_t k = 0; k < ps.size(); ++k) {
                           if (!t.requires_grad(ps[k])) {
                               continue;
                           }
                           auto dst = t.grad_buffer(ps[k]).data();
                           for (std::size_t j = 0; j < chunk; ++j) {
                               dst[j] += g[k * chunk + j];
                           }
                       }
                   });
}

template <typename T>
Var Tape<T>::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_rows: no parts");
    }
    require_matrix(value(parts[0]).shape(), "concat_rows");
    const std::size_t cols = value(parts[0]).cols();
    std::size_t rows = 0;
    bool rg = false;
    for (Var p : parts) {
        const Tensor<T>& pv = value(p);
        require_matrix(pv.shape(), "concat_rows");
        if (pv.cols() != cols) {
            throw ShapeError("concat_rows: column mismatch " + shape_str(value(parts[0]).shape()) + " vs " +
                             shape_str(pv.shape()));
        }
        rows += pv.rows();
        rg = rg || requires_grad(p);
    }
    std::vector<T> data;
    data.reserve(rows * cols);
    for (Var p : parts) {
        auto d = value(p).data();
        data.insert(data.end(), d.begin(), d.end());
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push_op(Tensor<T>(Shape{rows, cols}, std::move(data)), rg, [ps](Tape& t, Var, const Tensor<T>& g) {
        std::size_t offset = 0;
        for (Var p : ps) {
            const std::size_t len = t.value(p).size();
            if (t.requires_grad(p)) {
                auto dst = t.grad_buffer(p).data();
                for (std::size_t j = 0; j < len; ++j) {
                    dst[j] += g[offset + j];
                }
            }
            offset += len;
        }
    });
}

template <typename T>
Var Tape<T>::permute_rows(Var a, std::vector<std::size_t> perm) {
    const Tensor<T>& av = value(a);
    require_matrix(av.shape(), "permute_rows");
    const std::size_t cols = av.cols();
    Tensor<T> out(Shape{perm.size(), cols});
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= av.rows()) {
            throw ShapeError("permute_rows: source row " + std::to_string(perm[i]) + " out of range for " +
                             shape_str(av.shape()));
        }
        auto src = av.row(perm[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return push_op(std::move(out), {a}, [a, perm = std::move(perm), cols](Tape& t, Var, const Tensor<T>& g) {
        Tensor<T>& ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < perm.size(); ++i) {
            auto dst = ga.row(perm[i]);
            for (std::size_t j = 0; j < cols; ++j) {
                dst[j] += g[i * cols + j];
            }
        }
    });
}

template <typename T>
Var Tape<T>::cosine(Var u, Var v) {
    const Tensor<T>& uv = value(u);
    const Tensor<T>& vv = value(v);
    if (uv.size() != vv.size()) {
        throw ShapeError("cosine: length mismatch " + shape_str(uv.shape()) + " vs " + shape_str(vv.shape()));
    }
    T dot{0}, nu2{0}, nv2{0};
    for (std::size_t i = 0; i < uv.size(); ++i) {
        dot += uv[i] * vv[i];
        nu2 += uv[i] * uv[i];
        nv2 += vv[i] * vv[i];
    }
    if (nu2 == T{0} || nv2 == T{0}) {
        throw DegenerateInputError("cosine: zero-norm operand");
    }
    const T denom = std::sqrt(nu2 * nv2);
    const T c = dot / denom;
    return push_op(Tensor<T>::scalar(c), {u, v}, [u, v, nu2, nv2, denom, c](Tape& t, Var, const Tensor<T>& g) {
        const T g0 = g[0];
        const Tensor<T>& uv = t.value(u);
        const Tensor<T>& vv = t.value(v);
        if (t.requires_grad(u)) {
            auto du = t.grad_buffer(u).data();
            for (std::size_t i = 0; i < du.size(); ++i) {
                du[i] += g0 * (vv[i] / denom - c * uv[i] / nu2);
            }
        }
        if (t.requires_grad(v)) {
            auto dv = t.grad_buffer(v).data();
            for (std::size_t i = 0; i < dv.size(); ++i) {
                dv[i] += g0 * (uv[i] / denom - c * vv[i] / nv2);
            }
        }
    });
}

template class Tape<float>;
template class Tape<double>;

} // namespace drin
