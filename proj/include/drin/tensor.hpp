#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "drin/error.hpp"

namespace drin {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "x" : "") << shape[i];
    }
    os << ']';
    return os.str();
}

/// Dense row-major tensor. Rank 0 is a scalar, rank 1 a vector, rank 2 a
/// matrix; nothing in the engine needs more.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() : data_(1, T{0}) {}

    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), T{0}) {}

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_size(shape_) != data_.size()) {
            throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                             std::to_string(data_.size()) + " elements");
        }
    }

    static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) {
            t(i, i) = T{1};
        }
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t rows() const {
        require_rank(2);
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank(2);
        return shape_[1];
    }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    T operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    std::span<const T> row(std::size_t i) const { return data().subspan(i * shape_[1], shape_[1]); }
    std::span<T> row(std::size_t i) { return data().subspan(i * shape_[1], shape_[1]); }

    T item() const {
        if (data_.size() != 1) {
            throw ShapeError("item() on tensor of shape " + shape_str(shape_));
        }
        return data_[0];
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    template <typename U>
    Tensor<U> cast() const {
        return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    Tensor transposed() const {
        Tensor out(Shape{cols(), rows()});
        for (std::size_t i = 0; i < rows(); ++i) {
            for (std::size_t j = 0; j < cols(); ++j) {
                out(j, i) = (*this)(i, j);
            }
        }
        return out;
    }

    bool operator==(const Tensor&) const = default;

private:
    void require_rank(std::size_t r) const {
        if (shape_.size() != r) {
            throw ShapeError("expected rank " + std::to_string(r) + " tensor, got " + shape_str(shape_));
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

} // namespace drin
