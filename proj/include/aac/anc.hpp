#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace aac {

/// Classical LMS adaptive filter: e = d - w.x ; w += 2 mu e x.
class LmsFilter {
public:
    LmsFilter(std::size_t taps, double mu);

    /// One update. Returns the error e_t. Throws on non-finite input.
    double step(std::span<const double> x, double d);

    std::span<const double> weights() const noexcept { return weights_; }
    void set_weights(std::span<const double> w);
    double mu() const noexcept { return mu_; }
    std::size_t taps() const noexcept { return weights_.size(); }

private:
    std::vector<double> weights_;
    double mu_;
};

/// Largest stable step for the 2*mu update: 1 / (taps * input power).
double lms_stability_bound(std::size_t taps, double input_power);

struct AncResult {
    std::vector<double> cleaned; // e_t for every processed sample
    bool diverged = false;
    std::size_t diverged_at = 0;
};

/// Streams a tap-delay line over `reference` and cancels its correlate from
/// `primary`. Stops early and flags divergence if the weights blow up.
AncResult run_anc(std::span<const double> primary, std::span<const double> reference, LmsFilter& filter);

double mean_power(std::span<const double> x);

struct AncBenchmark {
    std::vector<double> signal;    // clean sine s_t
    std::vector<double> noise;     // interference n_t in the primary
    std::vector<double> primary;   // s_t + n_t
    std::vector<double> reference; // white source v_t, n = h * v
};

/// Sine plus FIR-filtered white noise, with the white source as reference.
AncBenchmark make_anc_benchmark(std::size_t length, std::uint64_t seed);

struct AncMetrics {
    double input_noise_power = 0.0;
    double residual_noise_power = 0.0;
    double reduction_db = 0.0;
    bool diverged = false;
    std::vector<double> weights;
};

/// Runs the benchmark and measures noise power over the final `tail` samples.
AncMetrics evaluate_anc(std::size_t taps, double mu, std::size_t length, std::size_t tail, std::uint64_t seed);

} // namespace aac
