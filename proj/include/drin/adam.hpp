#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "drin/error.hpp"
#include "drin/parameter.hpp"

namespace drin {

struct AdamHyper {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates, one pair per parameter in the order the
/// parameters are passed to `adam_step`.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::uint64_t step = 0;

    bool operator==(const AdamState&) const = default;
};

/// Bias-corrected Adam update in place for step number `t` (1-based).
/// Checks every gradient before touching anything; a non-finite entry
/// raises DivergenceError naming the parameter.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state, const AdamHyper& hp, std::uint64_t t) {
    if (t < 1) {
        throw ContractError("adam_step: step count must start at 1");
    }
    for (const Parameter<T>* p : params) {
        if (p->grad.shape() != p->value.shape()) {
            throw ShapeError("adam_step: gradient of '" + p->name + "' has shape " + shape_str(p->grad.shape()));
        }
        for (T g : p->grad.data()) {
            if (!std::isfinite(g)) {
                throw DivergenceError("non-finite gradient in parameter '" + p->name + "'");
            }
        }
    }
    if (state.m.empty()) {
        for (const Parameter<T>* p : params) {
            state.m.emplace_back(p->value.shape());
            state.v.emplace_back(p->value.shape());
        }
    }
    if (state.m.size() != params.size()) {
        throw ContractError("adam_step: optimizer state does not match the parameter list");
    }

    const T b1 = static_cast<T>(hp.beta1);
    const T b2 = static_cast<T>(hp.beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(hp.beta1, static_cast<double>(t)));
    const T bc2 = static_cast<T>(1.0 - std::pow(hp.beta2, static_cast<double>(t)));
    const T lr = static_cast<T>(hp.learning_rate);
    const T eps = static_cast<T>(hp.epsilon);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k]->value.data();
        auto g = params[k]->grad.data();
        auto m = state.m[k].data();
        auto v = state.v[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (T{1} - b1) * g[i];
            v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
            const T m_hat = m[i] / bc1;
            const T v_hat = v[i] / bc2;
            w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
    state.step = t;
}

} // namespace drin
