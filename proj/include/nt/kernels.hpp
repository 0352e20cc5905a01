#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nt::kernels {

// Parallelism is only ever applied across independent output elements, with
// each element reduced in a fixed serial order. Results are therefore
// bitwise identical for any thread count, including 1.
inline bool& parallel_flag() {
    static bool enabled = true;
    return enabled;
}
inline void set_parallel(bool on) { parallel_flag() = on; }
inline bool parallel_enabled() { return parallel_flag(); }

template <typename F>
void par_for(int64_t n, int64_t min_parallel, F&& body) {
#ifdef _OPENMP
    if (parallel_enabled() && n >= min_parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (int64_t i = 0; i < n; ++i) body(i);
}

// C(m x n) += A(m x k) * B(k x n), row-major, optional accumulate.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
    par_for(m, std::max<int64_t>(1, 16384 / std::max<int64_t>(1, k * n)), [&](int64_t i) {
        T* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, T(0));
        const T* arow = a + i * k;
        for (int64_t l = 0; l < k; ++l) {
            T av = arow[l];
            const T* brow = b + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    });
}

// C(m x k) += A(m x n) * B(k x n)^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k, bool accumulate) {
    par_for(m, std::max<int64_t>(1, 16384 / std::max<int64_t>(1, k * n)), [&](int64_t i) {
        const T* arow = a + i * n;
        T* crow = c + i * k;
        for (int64_t l = 0; l < k; ++l) {
            const T* brow = b + l * n;
            T acc = accumulate ? crow[l] : T(0);
            for (int64_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
            crow[l] = acc;
        }
    });
}

// C(m x n) += A(k x m)^T * B(k x n)
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int64_t k, int64_t m, int64_t n, bool accumulate) {
    par_for(m, std::max<int64_t>(1, 16384 / std::max<int64_t>(1, k * n)), [&](int64_t i) {
        T* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, T(0));
        for (int64_t l = 0; l < k; ++l) {
            T av = a[l * m + i];
            const T* brow = b + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    });
}

template <typename T>
void transpose(const T* a, T* out, int64_t m, int64_t n) {
    par_for(m, 256, [&](int64_t i) {
        for (int64_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    });
}

template <typename T, typename F>
void map(const T* x, T* y, int64_t n, F&& f) {
    par_for(n, 4096, [&](int64_t i) { y[i] = f(x[i]); });
}

template <typename T>
T gelu_val(T x) {
    return T(0.5) * x * (T(1) + T(std::erf(double(x) * 0.7071067811865475244)));
}

template <typename T>
T gelu_grad(T x) {
    double xd = double(x);
    double cdf = 0.5 * (1.0 + std::erf(xd * 0.7071067811865475244));
    double pdf = std::exp(-0.5 * xd * xd) * 0.3989422804014326779;
    return T(cdf + xd * pdf);
}

template <typename T>
T sigmoid_val(T x) {
    if (x >= T(0)) return T(1) / (T(1) + T(std::exp(double(-x))));
    T e = T(std::exp(double(x)));
    return e / (T(1) + e);
}

// Row-wise softmax over the last axis with a per-row boolean key mask.
// Masked slots get exactly zero; a fully masked row becomes the zero row.
template <typename T>
void softmax_row(const T* x, const uint8_t* mask, T* y, int64_t width) {
    T mx = -std::numeric_limits<T>::infinity();
    for (int64_t j = 0; j < width; ++j)
        if (!mask || mask[j]) mx = std::max(mx, x[j]);
    if (mx == -std::numeric_limits<T>::infinity()) {
        std::fill(y, y + width, T(0));
        return;
    }
    T sum = T(0);
    for (int64_t j = 0; j < width; ++j) {
        if (!mask || mask[j]) {
            y[j] = T(std::exp(double(x[j] - mx)));
            sum += y[j];
        } else {
            y[j] = T(0);
        }
    }
    for (int64_t j = 0; j < width; ++j) y[j] /= sum;
}

// Plain serial loops kept as the reference implementations the parallel
// kernels are tested and benchmarked against.
namespace ref {

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * n + j] : T(0);
            for (int64_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
            c[i * n + j] = acc;
        }
}

template <typename T>
void gelu(const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = gelu_val(x[i]);
}

template <typename T>
void segment_sum(const T* x, const int64_t* seg, int64_t rows, int64_t width, T* out,
                 int64_t num_segments) {
    std::fill(out, out + num_segments * width, T(0));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < width; ++j) out[seg[r] * width + j] += x[r * width + j];
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t rows, int64_t width) {
    for (int64_t r = 0; r < rows; ++r) softmax_row<T>(x + r * width, nullptr, y + r * width, width);
}

}  // namespace ref

}  // namespace nt::kernels
