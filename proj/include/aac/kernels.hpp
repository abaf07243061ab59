#pragma once

// Data-parallel inner loops. Every kernel in `aac::kernels` has a
// single-threaded twin in `aac::kernels::serial` with the same per-output
// summation order, so the two agree bit-for-bit at any thread count.

#include <cstddef>
#include <span>

#include "aac/matrix.hpp"

namespace aac::kernels {

/// z[i] = bias + sum_j x(i, j) * w[j]
void logistic_margins(const MatrixD& x, std::span<const double> w, double bias, std::span<double> z);

/// g[j] = sum_i r[i] * x(i, j), summed in increasing i.
void weighted_column_sums(const MatrixD& x, std::span<const double> r, std::span<double> g);

/// y[r] = sum_c w(r, c) * x[c]
void matvec(const MatrixF& w, std::span<const float> x, std::span<float> y);

/// out.row(i) = fn(in.row(i)) for every row. `fn` must be thread-safe.
template <typename Fn>
void map_rows(const MatrixD& in, MatrixD& out, Fn&& fn) {
    const auto n = static_cast<long>(in.rows());
#pragma omp parallel for schedule(static) if (n > 64)
    for (long i = 0; i < n; ++i) {
        fn(in.row(static_cast<std::size_t>(i)), out.row(static_cast<std::size_t>(i)));
    }
}

/// Number of worker threads OpenMP would use (1 without OpenMP).
int max_threads();
void set_threads(int n);

namespace serial {

void logistic_margins(const MatrixD& x, std::span<const double> w, double bias, std::span<double> z);
void weighted_column_sums(const MatrixD& x, std::span<const double> r, std::span<double> g);
void matvec(const MatrixF& w, std::span<const float> x, std::span<float> y);

template <typename Fn>
void map_rows(const MatrixD& in, MatrixD& out, Fn&& fn) {
    for (std::size_t i = 0; i < in.rows(); ++i) {
        fn(in.row(i), out.row(i));
    }
}

} // namespace serial
} // namespace aac::kernels
