#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "drin/tensor.hpp"
#include "oracles.hpp"

namespace testutil {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("drin_" + tag + "_" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

template <typename T>
drin::Tensor<T> to_tensor(const oracle::Matrix& m) {
    drin::Tensor<T> t(drin::Shape{m.size(), m[0].size()});
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m[0].size(); ++j) {
            t(i, j) = static_cast<T>(m[i][j]);
        }
    }
    return t;
}

template <typename T>
oracle::Matrix to_matrix(const drin::Tensor<T>& t) {
    oracle::Matrix m = oracle::zeros(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) {
            m[i][j] = static_cast<double>(t(i, j));
        }
    }
    return m;
}

template <typename T>
drin::Tensor<T> random_tensor(drin::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    drin::Tensor<T> t(std::move(shape));
    for (T& x : t.data()) {
        x = static_cast<T>(d(rng));
    }
    return t;
}

} // namespace testutil
