#include "aac/anc.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "aac/error.hpp"
#include "aac/rng.hpp"

namespace aac {

LmsFilter::LmsFilter(std::size_t taps, double mu) : weights_(taps, 0.0), mu_(mu) {
    if (taps == 0) {
        fail(ErrorKind::config, "bad_taps", "LMS filter needs at least one tap");
    }
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        fail(ErrorKind::config, "bad_step_size", "LMS step size must be positive and finite");
    }
}

void LmsFilter::set_weights(std::span<const double> w) {
    if (w.size() != weights_.size()) {
        fail(ErrorKind::data, "shape_mismatch", "weight vector length differs from tap count");
    }
    weights_.assign(w.begin(), w.end());
}

double LmsFilter::step(std::span<const double> x, double d) {
    if (x.size() != weights_.size()) {
        fail(ErrorKind::data, "shape_mismatch", "reference vector length differs from tap count");
    }
    if (!std::isfinite(d)) {
        fail(ErrorKind::data, "non_finite", "LMS primary sample is not finite");
    }
    double y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) {
            fail(ErrorKind::data, "non_finite", "LMS reference sample is not finite");
        }
        y += weights_[i] * x[i];
    }
    const double e = d - y;
    const double g = 2.0 * mu_ * e;
    for (std::size_t i = 0; i < x.size(); ++i) {
        weights_[i] += g * x[i];
    }
    return e;
}

double lms_stability_bound(std::size_t taps, double input_power) {
    return 1.0 / (static_cast<double>(taps) * input_power);
}

AncResult run_anc(std::span<const double> primary, std::span<const double> reference, LmsFilter& filter) {
    if (primary.size() != reference.size()) {
        fail(ErrorKind::data, "shape_mismatch", "primary and reference lengths differ");
    }
    AncResult result;
    result.cleaned.reserve(primary.size());
    std::vector<double> line(filter.taps(), 0.0);
    constexpr double kBlowUp = 1e8;
    for (std::size_t t = 0; t < primary.size(); ++t) {
        // Tap-delay line: line[0] is the newest reference sample.
        for (std::size_t i = line.size() - 1; i > 0; --i) {
            line[i] = line[i - 1];
        }
        line[0] = reference[t];
        const double e = filter.step(line, primary[t]);
        result.cleaned.push_back(e);
        double norm2 = 0.0;
        for (double w : filter.weights()) {
            norm2 += w * w;
        }
        if (!std::isfinite(norm2) || norm2 > kBlowUp * kBlowUp || !std::isfinite(e)) {
            result.diverged = true;
            result.diverged_at = t;
            break;
        }
    }
    return result;
}

double mean_power(std::span<const double> x) {
    if (x.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (double v : x) {
        acc += v * v;
    }
    return acc / static_cast<double>(x.size());
}

AncBenchmark make_anc_benchmark(std::size_t length, std::uint64_t seed) {
    static constexpr double kChannel[] = {0.8, -0.4, 0.25, 0.1};
    Rng rng(derive_seed(seed, "anc-benchmark"));
    AncBenchmark b;
    b.reference.resize(length);
    for (auto& v : b.reference) {
        v = rng.normal();
    }
    b.signal.resize(length);
    b.noise.resize(length, 0.0);
    b.primary.resize(length);
    for (std::size_t t = 0; t < length; ++t) {
        b.signal[t] = 0.5 * std::sin(2.0 * std::numbers::pi * 0.01 * static_cast<double>(t));
        for (std::size_t k = 0; k < std::size(kChannel) && k <= t; ++k) {
            b.noise[t] += kChannel[k] * b.reference[t - k];
        }
        b.primary[t] = b.signal[t] + b.noise[t];
    }
    return b;
}

AncMetrics evaluate_anc(std::size_t taps, double mu, std::size_t length, std::size_t tail, std::uint64_t seed) {
    if (tail == 0 || tail > length) {
        fail(ErrorKind::config, "bad_tail", "measurement tail must lie in [1, length]");
    }
    const auto bench = make_anc_benchmark(length, seed);
    LmsFilter filter(taps, mu);
    const auto result = run_anc(bench.primary, bench.reference, filter);
    AncMetrics m;
    m.diverged = result.diverged;
    m.weights.assign(filter.weights().begin(), filter.weights().end());
    const std::size_t start = length - tail;
    m.input_noise_power = mean_power(std::span<const double>(bench.noise).subspan(start));
    if (result.diverged) {
        m.residual_noise_power = std::numeric_limits<double>::infinity();
        m.reduction_db = -std::numeric_limits<double>::infinity();
        return m;
    }
    std::vector<double> residual(tail);
    for (std::size_t t = start; t < length; ++t) {
        residual[t - start] = result.cleaned[t] - bench.signal[t];
    }
    m.residual_noise_power = mean_power(residual);
    m.reduction_db = 10.0 * std::log10(m.input_noise_power / m.residual_noise_power);
    return m;
}

} // namespace aac
