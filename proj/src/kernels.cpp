#include "aac/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aac::kernels {

namespace {

void check_margins(const MatrixD& x, std::span<const double> w, std::span<double> z) {
    if (w.size() != x.cols() || z.size() != x.rows()) {
        fail(ErrorKind::data, "shape_mismatch", "logistic_margins: dimension mismatch");
    }
}

void check_column_sums(const MatrixD& x, std::span<const double> r, std::span<double> g) {
    if (r.size() != x.rows() || g.size() != x.cols()) {
        fail(ErrorKind::data, "shape_mismatch", "weighted_column_sums: dimension mismatch");
    }
}

void check_matvec(const MatrixF& w, std::span<const float> x, std::span<float> y) {
    if (x.size() != w.cols() || y.size() != w.rows()) {
        fail(ErrorKind::data, "shape_mismatch", "matvec: dimension mismatch");
    }
}

} // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(n < 1 ? 1 : n);
#else
    (void)n;
#endif
}

void logistic_margins(const MatrixD& x, std::span<const double> w, double bias, std::span<double> z) {
    check_margins(x, w, z);
    const auto n = static_cast<long>(x.rows());
    const std::size_t d = x.cols();
#pragma omp parallel for schedule(static) if (n * static_cast<long>(d) > 32768)
    for (long i = 0; i < n; ++i) {
        const auto row = x.row(static_cast<std::size_t>(i));
        double acc = bias;
        for (std::size_t j = 0; j < d; ++j) {
            acc += row[j] * w[j];
        }
        z[static_cast<std::size_t>(i)] = acc;
    }
}

void weighted_column_sums(const MatrixD& x, std::span<const double> r, std::span<double> g) {
    check_column_sums(x, r, g);
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    // Each thread owns a contiguous block of outputs and sweeps the rows in order.
#pragma omp parallel if (n * d > 32768)
    {
        std::size_t lo = 0, hi = d;
#ifdef _OPENMP
        const auto t = static_cast<std::size_t>(omp_get_thread_num());
        const auto nt = static_cast<std::size_t>(omp_get_num_threads());
        lo = d * t / nt;
        hi = d * (t + 1) / nt;
#endif
        std::fill(g.begin() + static_cast<long>(lo), g.begin() + static_cast<long>(hi), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(i);
            const double ri = r[i];
            for (std::size_t j = lo; j < hi; ++j) {
                g[j] += ri * row[j];
            }
        }
    }
}

void matvec(const MatrixF& w, std::span<const float> x, std::span<float> y) {
    check_matvec(w, x, y);
    const auto rows = static_cast<long>(w.rows());
    const std::size_t cols = w.cols();
#pragma omp parallel for schedule(static) if (rows * static_cast<long>(cols) > 65536)
    for (long r = 0; r < rows; ++r) {
        const auto wr = w.row(static_cast<std::size_t>(r));
        float acc = 0.0f;
        for (std::size_t c = 0; c < cols; ++c) {
            acc += wr[c] * x[c];
        }
        y[static_cast<std::size_t>(r)] = acc;
    }
}

namespace serial {

void logistic_margins(const MatrixD& x, std::span<const double> w, double bias, std::span<double> z) {
    check_margins(x, w, z);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double acc = bias;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            acc += x(i, j) * w[j];
        }
        z[i] = acc;
    }
}

void weighted_column_sums(const MatrixD& x, std::span<const double> r, std::span<double> g) {
    check_column_sums(x, r, g);
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            g[j] += r[i] * x(i, j);
        }
    }
}

void matvec(const MatrixF& w, std::span<const float> x, std::span<float> y) {
    check_matvec(w, x, y);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < w.cols(); ++c) {
            acc += w(r, c) * x[c];
        }
        y[r] = acc;
    }
}

} // namespace serial
} // namespace aac::kernels
