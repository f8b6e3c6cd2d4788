#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "drin/tape.hpp"

namespace drin {

/// Finite-difference check of the full ranker on one synthetic mention,
/// always in double precision.
struct GradCheckConfig {
    std::size_t hidden_dim = 8;
    std::size_t r = 2;
    std::size_t layers = 2;
    std::size_t k = 2; // object regions per image
    std::uint64_t seed = 7;
    double step = 1e-5;
    double tolerance = 1e-4;
    Activation activation = Activation::tanh;
    std::size_t text_dim = 768;
    std::size_t image_dim = 2048;
};

struct ParamGradError {
    std::string name;
    std::size_t count = 0;
    double max_rel_error = 0.0;
    double max_abs_grad = 0.0;
};

struct GradCheckReport {
    std::vector<ParamGradError> params;
    double max_rel_error = 0.0;
    double seconds = 0.0;
    bool passed = false;
};

/// |a - n| / max(|a|, |n|), or the absolute error |a - n| when |a| <= 1e-8.
double relative_error(double analytic, double numeric);

/// Checks every coordinate of every trainable tensor with central
/// differences. The objective is the ranking loss (with a margin large
/// enough to keep the hinge active) plus a fixed random combination of the
/// candidate scores, so every parameter that can move a score receives
/// gradient. The last layer's edge weight never reaches the scores, so its
/// gradient is exactly zero on both sides of the check.
GradCheckReport run_gradcheck(const GradCheckConfig& config);

} // namespace drin
