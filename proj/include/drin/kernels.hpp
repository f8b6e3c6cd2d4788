#pragma once

// Dense kernels behind the autodiff tape. Each kernel exists twice: a serial
// reference in `kernels::serial` and an OpenMP version in `kernels`. Both
// compute every output element with the same accumulation order, so their
// results are bitwise identical regardless of thread count. Tests rely on that.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace drin::kernels {

/// Below this many multiply-adds the OpenMP versions run on the calling thread.
inline constexpr std::size_t kParallelWork = 1u << 15;

/// Sums `terms` in ascending order of value. The result depends only on the
/// multiset of terms, not on their arrangement. Two terms commute exactly, so
/// the sort is skipped for short lists.
template <typename T>
T order_invariant_sum(std::span<T> terms) {
    if (terms.size() > 2) {
        std::sort(terms.begin(), terms.end());
    }
    T acc{0};
    for (T t : terms) {
        acc += t;
    }
    return acc;
}

namespace serial {

/// c (+)= a * b with a: m x k, b: k x n.
template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c.data() + i * n;
        if (!accumulate) {
            std::fill(ci, ci + n, T{0});
        }
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = a[i * k + p];
            const T* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += aip * bp[j];
            }
        }
    }
}

/// c (+)= a * b^T with a: m x k, b: n x k.
template <typename T>
void matmul_nt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* bj = b.data() + j * k;
            T acc{0};
            for (std::size_t p = 0; p < k; ++p) {
                acc += ai[p] * bj[p];
            }
            c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
        }
    }
}

/// c (+)= a^T * b with a: k x m, b: k x n.
template <typename T>
void matmul_tn(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c.data() + i * n;
        if (!accumulate) {
            std::fill(ci, ci + n, T{0});
        }
        for (std::size_t p = 0; p < k; ++p) {
            const T api = a[p * m + i];
            const T* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += api * bp[j];
            }
        }
    }
}

/// out = adj * x (adj: n x n, x: n x d) where each output element sums the
/// nonzero neighbour terms with `order_invariant_sum`. Relabelling vertices
/// permutes the output exactly.
template <typename T>
void propagate(std::span<const T> adj, std::span<const T> x, std::span<T> out, std::size_t n, std::size_t d) {
    std::vector<std::size_t> nbrs;
    std::vector<T> terms;
    for (std::size_t i = 0; i < n; ++i) {
        nbrs.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (adj[i * n + j] != T{0}) {
                nbrs.push_back(j);
            }
        }
        terms.resize(nbrs.size());
        for (std::size_t f = 0; f < d; ++f) {
            for (std::size_t t = 0; t < nbrs.size(); ++t) {
                terms[t] = adj[i * n + nbrs[t]] * x[nbrs[t] * d + f];
            }
            out[i * d + f] = order_invariant_sum(std::span<T>(terms));
        }
    }
}

} // namespace serial

template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate) {
    const bool par = m > 1 && m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
        serial::matmul<T>(a.subspan(i * k, k), b, c.subspan(i * n, n), 1, k, n, accumulate);
    }
}

template <typename T>
void matmul_nt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
    const bool par = m > 1 && m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
        serial::matmul_nt<T>(a.subspan(i * k, k), b, c.subspan(i * n, n), 1, k, n, accumulate);
    }
}

template <typename T>
void matmul_tn(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
    const bool par = m > 1 && m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c.data() + i * n;
        if (!accumulate) {
            std::fill(ci, ci + n, T{0});
        }
        for (std::size_t p = 0; p < k; ++p) {
            const T api = a[p * m + i];
            const T* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += api * bp[j];
            }
        }
    }
}

template <typename T>
void propagate(std::span<const T> adj, std::span<const T> x, std::span<T> out, std::size_t n, std::size_t d) {
    const bool par = n > 1 && n * n * d >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> nbrs;
        for (std::size_t j = 0; j < n; ++j) {
            if (adj[i * n + j] != T{0}) {
                nbrs.push_back(j);
            }
        }
        std::vector<T> terms(nbrs.size());
        for (std::size_t f = 0; f < d; ++f) {
            for (std::size_t t = 0; t < nbrs.size(); ++t) {
                terms[t] = adj[i * n + nbrs[t]] * x[nbrs[t] * d + f];
            }
            out[i * d + f] = order_invariant_sum(std::span<T>(terms));
        }
    }
}

} // namespace drin::kernels
