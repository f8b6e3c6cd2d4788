#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "drin/tensor.hpp"

namespace drin {

enum class Activation { tanh, leaky_relu };

inline constexpr double kLeakySlope = 0.01;

std::string to_string(Activation kind);
Activation parse_activation(const std::string& name);

/// Handle to a node on a `Tape`. Only meaningful for the tape that issued it.
struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
};

/// Reverse-mode computation graph. Nodes are appended in evaluation order, so
/// the tape itself is a topological order and `backward` walks it in reverse.
///
/// A tape is built fresh for every forward pass and is not thread-safe.
/// Parameters are borrowed rather than copied: `parameter()` keeps a pointer
/// to the caller's value and accumulates gradients straight into the caller's
/// gradient buffer, so the referenced tensors must outlive the tape.
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Non-differentiable input.
    Var constant(Tensor<T> value);
    /// Owned input; its gradient is readable through `grad()`.
    Var leaf(Tensor<T> value, bool requires_grad = true);
    /// Borrowed input. With a null `grad_sink` it behaves as a constant.
    Var parameter(const Tensor<T>& value, Tensor<T>* grad_sink);

    const Tensor<T>& value(Var v) const { return *node(v).value; }
    /// Gradient accumulated so far; zeros if nothing has flowed into `v`.
    Tensor<T> grad(Var v) const;
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Propagates d(loss)/d(node) to every node that requires a gradient.
    /// Intermediate gradients are reset first; leaf and parameter gradients
    /// accumulate across calls.
    void backward(Var loss);

    Var matmul(Var a, Var b);
    /// a * b^T
    Var matmul_nt(Var a, Var b);
    /// adj * x with permutation-invariant neighbour accumulation.
    Var propagate(Var adj, Var x);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, T factor);
    Var add_scalar(Var a, T offset);
    /// Elementwise product with a constant tensor of the same shape.
    Var mask(Var a, const Tensor<T>& m);

    Var activation(Var a, Activation kind);
    /// max(x, 0) elementwise.
    Var hinge(Var a);

    Var sum(Var a);
    /// Row i of a matrix as a vector.
    Var row(Var a, std::size_t i);
    /// Element i of a vector as a scalar.
    Var pick(Var a, std::size_t i);
    /// Stacks equally shaped parts along a new leading axis.
    Var stack(std::span<const Var> parts);
    /// Concatenates matrices with equal column counts.
    Var concat_rows(std::span<const Var> parts);
    /// Output row i is input row perm[i].
    Var permute_rows(Var a, std::vector<std::size_t> perm);

    /// u.v / (|u||v|). Throws DegenerateInputError on a zero-norm operand.
    Var cosine(Var u, Var v);

private:
    using BackwardFn = std::function<void(Tape&, Var self, const Tensor<T>& out_grad)>;

    struct Node {
        Tensor<T> owned_value;
        const Tensor<T>* value = nullptr;
        Tensor<T> owned_grad;
        Tensor<T>* grad = nullptr;
        bool grad_allocated = false;
        bool requires_grad = false;
        bool is_leaf = true;
        BackwardFn backward;
    };

    const Node& node(Var v) const;
    Node& node(Var v);
    Var push_op(Tensor<T> value, std::initializer_list<Var> parents, BackwardFn backward);
    Var push_op(Tensor<T> value, bool requires_grad, BackwardFn backward);
    /// Gradient buffer of `v`, zero-initialised on first use.
    Tensor<T>& grad_buffer(Var v);

    std::deque<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

} // namespace drin
