#pragma once

#include <cmath>
#include <random>
#include <string>

#include "drin/tape.hpp"
#include "drin/tensor.hpp"

namespace drin {

/// Trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() {
        if (grad.shape() == value.shape()) {
            grad.fill(T{0});
        } else {
            grad = Tensor<T>(value.shape());
        }
    }

    /// Puts the parameter on `tape`; gradients flow into `grad`.
    Var bind(Tape<T>& tape) { return tape.parameter(value, &grad); }
    /// Read-only binding for inference. Safe to use from several threads.
    Var bind_frozen(Tape<T>& tape) const { return tape.parameter(value, nullptr); }
};

/// rows x cols matrix drawn uniformly from [-1/sqrt(cols), 1/sqrt(cols)].
template <typename T>
Tensor<T> fan_in_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> t(Shape{rows, cols});
    for (T& x : t.data()) {
        x = static_cast<T>(dist(rng));
    }
    return t;
}

} // namespace drin
