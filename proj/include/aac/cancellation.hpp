#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aac/hnode.hpp"
#include "aac/matrix.hpp"
#include "aac/probing.hpp"

namespace aac {

enum class Strategy { mean, pct_hnode, pct_amplify, pct_fourier, pct_zero, hook, iti };

const char* to_string(Strategy strategy);
/// Throws aac::Error (config, "unknown_strategy").
Strategy parse_strategy(const std::string& name);
std::vector<Strategy> post_hoc_strategies();

/// max(h - b, 0), elementwise.
std::vector<double> excess(std::span<const double> h_vals, std::span<const double> baseline);

// Each strategy returns a modified copy of the full hidden vector `h`.
std::vector<double> cancel_pct(std::span<const double> h, const HNodeConfig& config, double scale);
std::vector<double> cancel_mean(std::span<const double> h, const HNodeConfig& config);
std::vector<double> cancel_amplify(std::span<const double> h, const HNodeConfig& config);
std::vector<double> cancel_fourier(std::span<const double> h, const HNodeConfig& config);
std::vector<double> cancel_zero(std::span<const double> h, const HNodeConfig& config);
std::vector<double> cancel_iti(std::span<const double> h, std::span<const double> direction, double alpha_iti);

/// h - c * alpha * excess on the H-Nodes (Eq. 7 without gating).
std::vector<double> attenuate_adaptive(std::span<const double> h, const HNodeConfig& config, double confidence);

inline constexpr std::size_t kFourierComponents = 5;
inline constexpr double kFourierGate = 0.01;

/// Keeps the `components` largest spectral components of a real signal,
/// counting a bin and its conjugate partner as one.
std::vector<double> spectral_top_k(std::span<const double> signal, std::size_t components);

/// normalize(mean hallucinated - mean grounded)
std::vector<double> iti_direction(const MatrixD& x, std::span<const int> labels);

inline const std::vector<double> kItiAlphas = {5.0, 10.0, 15.0, 20.0, 30.0};

/// Vectors and labels at the H-Node layer, plus the probe that scores them.
struct EvalSet {
    MatrixD x;
    std::vector<int> labels;
};

EvalSet make_eval_set(const ActivationDataset& dataset, const SplitAssignment& splits, std::size_t layer);

struct CancellationReport {
    Strategy strategy = Strategy::pct_hnode;
    double reduc = 0.0;
    double drift = 0.0;
    std::optional<double> selectivity;
    double sep_delta = 0.0;
    double supp_pct = 0.0;
    double l1_suppression = 0.0; // sum over samples of |h - h'|_1
    double mean_conf_hallucinated_before = 0.0;
    double mean_conf_grounded_before = 0.0;
    double mean_conf_hallucinated_after = 0.0;
    double mean_conf_grounded_after = 0.0;
    std::optional<double> iti_alpha;
    std::vector<double> before;
    std::vector<double> after;
};

/// Sel = reduc / drift; nullopt when drift is exactly zero.
std::optional<double> selectivity(double reduc, double drift);

/// Builds the report from per-sample confidences before/after an edit.
CancellationReport summarize(Strategy strategy, std::vector<double> before, std::vector<double> after,
                             std::span<const int> labels, double l1_suppression);

struct StrategyContext {
    const Probe* probe = nullptr;
    const HNodeConfig* config = nullptr;
    std::span<const double> iti_direction;
    double iti_alpha = 10.0;
};

/// Applies one strategy to every row of `x` (parallel over rows).
MatrixD apply_strategy(Strategy strategy, const MatrixD& x, const StrategyContext& ctx);
/// Single-threaded reference for `apply_strategy`.
MatrixD apply_strategy_serial(Strategy strategy, const MatrixD& x, const StrategyContext& ctx);

CancellationReport evaluate_strategy(Strategy strategy, const EvalSet& eval, const StrategyContext& ctx);

struct ItiSweep {
    std::vector<CancellationReport> reports; // one per alpha
    std::size_t best = 0;                    // index with the highest defined selectivity
};

ItiSweep sweep_iti(const EvalSet& eval, const Probe& probe, std::span<const double> direction,
                   std::span<const double> alphas = kItiAlphas);

struct AblationResult {
    CancellationReport static_report;
    CancellationReport adaptive_report;
    std::optional<double> drift_reduction_pct;
};

/// Static (scale 1) vs confidence-weighted attenuation, both ungated.
AblationResult ablate_static_vs_adaptive(const EvalSet& eval, const Probe& probe, const HNodeConfig& config);

std::optional<double> drift_reduction_pct(double static_drift, double adaptive_drift);

struct PercentilePoint {
    double percentile = 0.0;
    CancellationReport report;
    double separation = 0.0; // after-gap (hallucinated - grounded mean confidence)
};

inline const std::vector<double> kPercentileGrid = {50, 60, 70, 75, 80, 85, 90, 95, 99};

/// pct_hnode at each percentile, re-fitting baselines on `grounded_full`.
std::vector<PercentilePoint> sweep_percentiles(const EvalSet& eval, const Probe& probe, const HNodeConfig& config,
                                               const MatrixD& grounded_full,
                                               std::span<const double> percentiles = kPercentileGrid);

} // namespace aac
