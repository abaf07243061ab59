#include "aac/cancellation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "aac/kernels.hpp"

namespace aac {

const char* to_string(Strategy strategy) {
    switch (strategy) {
    case Strategy::mean: return "mean";
    case Strategy::pct_hnode: return "pct_hnode";
    case Strategy::pct_amplify: return "pct_amplify";
    case Strategy::pct_fourier: return "pct_fourier";
    case Strategy::pct_zero: return "pct_zero";
    case Strategy::hook: return "hook";
    case Strategy::iti: return "iti";
    }
    return "?";
}

Strategy parse_strategy(const std::string& name) {
    for (Strategy s : {Strategy::mean, Strategy::pct_hnode, Strategy::pct_amplify, Strategy::pct_fourier,
                       Strategy::pct_zero, Strategy::hook, Strategy::iti}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    fail(ErrorKind::config, "unknown_strategy", "unknown strategy '" + name + "'");
}

std::vector<Strategy> post_hoc_strategies() {
    return {Strategy::mean, Strategy::pct_hnode, Strategy::pct_amplify, Strategy::pct_fourier, Strategy::pct_zero};
}

std::vector<double> excess(std::span<const double> h_vals, std::span<const double> baseline) {
    if (h_vals.size() != baseline.size()) {
        fail(ErrorKind::data, "shape_mismatch", "excess: activation and baseline lengths differ");
    }
    std::vector<double> out(h_vals.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::max(h_vals[i] - baseline[i], 0.0);
    }
    return out;
}

namespace {

void check_vector(std::span<const double> h, const HNodeConfig& config) {
    for (auto j : config.h_nodes) {
        if (j >= h.size()) {
            fail(ErrorKind::data, "shape_mismatch", "hidden vector shorter than H-Node index");
        }
    }
    for (auto j : config.anti_nodes) {
        if (j >= h.size()) {
            fail(ErrorKind::data, "shape_mismatch", "hidden vector shorter than anti-node index");
        }
    }
    if (config.baseline.size() != config.h_nodes.size()) {
        fail(ErrorKind::config, "bad_hnode_config", "baseline length differs from H-Node count");
    }
}

std::vector<double> gather(std::span<const double> h, std::span<const std::size_t> idx) {
    std::vector<double> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out[r] = h[idx[r]];
    }
    return out;
}

/// out[H] = h[H] - scale * max(h[H] - ref, 0)
std::vector<double> suppress(std::span<const double> h, const HNodeConfig& config,
                             std::span<const double> reference, double scale) {
    check_vector(h, config);
    std::vector<double> out(h.begin(), h.end());
    for (std::size_t r = 0; r < config.h_nodes.size(); ++r) {
        const std::size_t j = config.h_nodes[r];
        out[j] = h[j] - scale * std::max(h[j] - reference[r], 0.0);
    }
    return out;
}

} // namespace

std::vector<double> cancel_pct(std::span<const double> h, const HNodeConfig& config, double scale) {
    if (!(scale >= 0.0 && scale <= 1.0)) {
        fail(ErrorKind::config, "bad_scale", "cancellation scale must lie in [0, 1]");
    }
    return suppress(h, config, config.baseline, scale);
}

std::vector<double> cancel_mean(std::span<const double> h, const HNodeConfig& config) {
    if (config.grounded_mean.size() != config.h_nodes.size()) {
        fail(ErrorKind::config, "bad_hnode_config", "grounded_mean length differs from H-Node count");
    }
    return suppress(h, config, config.grounded_mean, config.alpha);
}

std::vector<double> cancel_amplify(std::span<const double> h, const HNodeConfig& config) {
    auto out = suppress(h, config, config.baseline, config.alpha);
    if (config.anti_baseline.size() != config.anti_nodes.size()) {
        fail(ErrorKind::config, "bad_hnode_config", "anti_baseline length differs from anti-node count");
    }
    for (std::size_t r = 0; r < config.anti_nodes.size(); ++r) {
        const std::size_t j = config.anti_nodes[r];
        out[j] = h[j] + config.alpha * std::max(config.anti_baseline[r] - h[j], 0.0);
    }
    return out;
}

std::vector<double> spectral_top_k(std::span<const double> signal, std::size_t components) {
    const std::size_t n = signal.size();
    if (n == 0) {
        return {};
    }
    const std::size_t half = n / 2;
    std::vector<std::complex<double>> spectrum(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += signal[t] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        spectrum[k] = acc;
    }
    std::vector<std::size_t> bins(half + 1);
    std::iota(bins.begin(), bins.end(), 0);
    std::stable_sort(bins.begin(), bins.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(spectrum[a]) > std::abs(spectrum[b]); });
    bins.resize(std::min(components, bins.size()));

    std::vector<double> out(n, 0.0);
    for (std::size_t k : bins) {
        // Bins other than DC and Nyquist stand for a conjugate pair.
        const bool paired = k != 0 && !(n % 2 == 0 && k == half);
        const double weight = paired ? 2.0 : 1.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            out[t] += weight * (spectrum[k].real() * std::cos(angle) - spectrum[k].imag() * std::sin(angle));
        }
    }
    for (auto& v : out) {
        v /= static_cast<double>(n);
    }
    return out;
}

std::vector<double> cancel_fourier(std::span<const double> h, const HNodeConfig& config) {
    check_vector(h, config);
    if (config.h_nodes.size() < 2) {
        fail(ErrorKind::config, "bad_hnode_config", "Fourier cancellation needs at least 2 H-Nodes");
    }
    const auto e = excess(gather(h, config.h_nodes), config.baseline);
    const double mean_excess = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
    std::vector<double> out(h.begin(), h.end());
    if (!(mean_excess > kFourierGate)) {
        return out;
    }
    const auto smooth = spectral_top_k(e, kFourierComponents);
    for (std::size_t r = 0; r < config.h_nodes.size(); ++r) {
        const std::size_t j = config.h_nodes[r];
        out[j] = h[j] - config.alpha * smooth[r];
    }
    return out;
}

std::vector<double> cancel_zero(std::span<const double> h, const HNodeConfig& config) {
    check_vector(h, config);
    std::vector<double> out(h.begin(), h.end());
    for (std::size_t r = 0; r < config.h_nodes.size(); ++r) {
        const std::size_t j = config.h_nodes[r];
        out[j] = std::min(h[j], config.baseline[r]);
    }
    return out;
}

std::vector<double> cancel_iti(std::span<const double> h, std::span<const double> direction, double alpha_iti) {
    if (direction.size() != h.size()) {
        fail(ErrorKind::data, "shape_mismatch", "ITI direction length differs from hidden size");
    }
    double norm2 = 0.0, proj = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) {
        norm2 += direction[j] * direction[j];
        proj += h[j] * direction[j];
    }
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9) {
        fail(ErrorKind::data, "non_unit_direction", "ITI direction must have unit norm");
    }
    std::vector<double> out(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        out[j] = h[j] - alpha_iti * proj * direction[j];
    }
    return out;
}

std::vector<double> attenuate_adaptive(std::span<const double> h, const HNodeConfig& config, double confidence) {
    return suppress(h, config, config.baseline, confidence * config.alpha);
}

std::vector<double> iti_direction(const MatrixD& x, std::span<const int> labels) {
    if (labels.size() != x.rows()) {
        fail(ErrorKind::data, "shape_mismatch", "ITI: label count differs from rows");
    }
    std::vector<double> pos(x.cols(), 0.0), neg(x.cols(), 0.0);
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto& acc = labels[i] == 1 ? pos : neg;
        (labels[i] == 1 ? n_pos : n_neg) += 1;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            acc[j] += x(i, j);
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        fail(ErrorKind::data, "empty_class", "ITI direction needs both classes");
    }
    std::vector<double> d(x.cols());
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        d[j] = pos[j] / static_cast<double>(n_pos) - neg[j] / static_cast<double>(n_neg);
        norm2 += d[j] * d[j];
    }
    if (!(norm2 > 0.0)) {
        fail(ErrorKind::numeric, "zero_direction", "class means coincide; ITI direction undefined");
    }
    const double norm = std::sqrt(norm2);
    for (auto& v : d) {
        v /= norm;
    }
    return d;
}

EvalSet make_eval_set(const ActivationDataset& dataset, const SplitAssignment& splits, std::size_t layer) {
    const auto idx = splits.indices(Split::eval);
    return {gather_features(dataset, idx, layer, Pooling::last_token), gather_labels(dataset, idx)};
}

std::optional<double> selectivity(double reduc, double drift) {
    if (drift == 0.0) {
        return std::nullopt;
    }
    return reduc / drift;
}

std::optional<double> drift_reduction_pct(double static_drift, double adaptive_drift) {
    if (static_drift == 0.0) {
        return std::nullopt;
    }
    return 100.0 * (static_drift - adaptive_drift) / static_drift;
}

CancellationReport summarize(Strategy strategy, std::vector<double> before, std::vector<double> after,
                             std::span<const int> labels, double l1_suppression) {
    if (before.size() != labels.size() || after.size() != labels.size()) {
        fail(ErrorKind::data, "shape_mismatch", "confidence and label counts differ");
    }
    double hb = 0, ha = 0, gb = 0, ga = 0, all_b = 0, all_a = 0;
    std::size_t nh = 0, ng = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        all_b += before[i];
        all_a += after[i];
        if (labels[i] == 1) {
            hb += before[i];
            ha += after[i];
            ++nh;
        } else {
            gb += before[i];
            ga += after[i];
            ++ng;
        }
    }
    if (nh == 0 || ng == 0) {
        fail(ErrorKind::data, "single_class_eval", "evaluation needs both classes");
    }
    CancellationReport rep;
    rep.strategy = strategy;
    rep.mean_conf_hallucinated_before = hb / static_cast<double>(nh);
    rep.mean_conf_hallucinated_after = ha / static_cast<double>(nh);
    rep.mean_conf_grounded_before = gb / static_cast<double>(ng);
    rep.mean_conf_grounded_after = ga / static_cast<double>(ng);
    rep.reduc = rep.mean_conf_hallucinated_before - rep.mean_conf_hallucinated_after;
    rep.drift = rep.mean_conf_grounded_before - rep.mean_conf_grounded_after;
    rep.selectivity = selectivity(rep.reduc, rep.drift);
    const double gap_before = rep.mean_conf_hallucinated_before - rep.mean_conf_grounded_before;
    const double gap_after = rep.mean_conf_hallucinated_after - rep.mean_conf_grounded_after;
    rep.sep_delta = gap_after - gap_before;
    const double n = static_cast<double>(labels.size());
    const double mean_before = all_b / n;
    rep.supp_pct = mean_before != 0.0 ? 100.0 * (mean_before - all_a / n) / mean_before : 0.0;
    rep.l1_suppression = l1_suppression;
    rep.before = std::move(before);
    rep.after = std::move(after);
    return rep;
}

namespace {

std::vector<double> apply_one(Strategy strategy, std::span<const double> h, const StrategyContext& ctx) {
    const HNodeConfig* cfg = ctx.config;
    auto need_config = [&] {
        if (cfg == nullptr) {
            fail(ErrorKind::config, "missing_config", std::string(to_string(strategy)) + " needs an H-Node config");
        }
    };
    switch (strategy) {
    case Strategy::mean: need_config(); return cancel_mean(h, *cfg);
    case Strategy::pct_hnode: need_config(); return cancel_pct(h, *cfg, cfg->alpha);
    case Strategy::pct_amplify: need_config(); return cancel_amplify(h, *cfg);
    case Strategy::pct_fourier: need_config(); return cancel_fourier(h, *cfg);
    case Strategy::pct_zero: need_config(); return cancel_zero(h, *cfg);
    case Strategy::hook: {
        need_config();
        if (ctx.probe == nullptr) {
            fail(ErrorKind::config, "missing_probe", "hook strategy needs a probe");
        }
        const double c = ctx.probe->confidence(h);
        if (c > cfg->theta) {
            return attenuate_adaptive(h, *cfg, c);
        }
        return {h.begin(), h.end()};
    }
    case Strategy::iti: return cancel_iti(h, ctx.iti_direction, ctx.iti_alpha);
    }
    fail(ErrorKind::config, "unknown_strategy", "unhandled strategy");
}

template <typename Mapper>
MatrixD apply_with(Strategy strategy, const MatrixD& x, const StrategyContext& ctx, Mapper&& map) {
    MatrixD out(x.rows(), x.cols());
    std::vector<std::exception_ptr> errors(x.rows());
    map(x, out, [&](std::span<const double> in, std::span<double> dst) {
        const auto i = static_cast<std::size_t>(in.data() - x.data().data()) / std::max<std::size_t>(x.cols(), 1);
        try {
            const auto edited = apply_one(strategy, in, ctx);
            std::copy(edited.begin(), edited.end(), dst.begin());
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

} // namespace

MatrixD apply_strategy(Strategy strategy, const MatrixD& x, const StrategyContext& ctx) {
    return apply_with(strategy, x, ctx, [](const MatrixD& in, MatrixD& out, auto&& fn) {
        kernels::map_rows(in, out, fn);
    });
}

MatrixD apply_strategy_serial(Strategy strategy, const MatrixD& x, const StrategyContext& ctx) {
    return apply_with(strategy, x, ctx, [](const MatrixD& in, MatrixD& out, auto&& fn) {
        kernels::serial::map_rows(in, out, fn);
    });
}

namespace {

double l1_distance(const MatrixD& a, const MatrixD& b) {
    double acc = 0.0;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        acc += std::abs(da[i] - db[i]);
    }
    return acc;
}

CancellationReport evaluate_edited(Strategy strategy, const EvalSet& eval, const Probe& probe, const MatrixD& edited) {
    auto before = probe_confidences(probe, eval.x);
    auto after = probe_confidences(probe, edited);
    return summarize(strategy, std::move(before), std::move(after), eval.labels, l1_distance(eval.x, edited));
}

} // namespace

CancellationReport evaluate_strategy(Strategy strategy, const EvalSet& eval, const StrategyContext& ctx) {
    if (ctx.probe == nullptr) {
        fail(ErrorKind::config, "missing_probe", "evaluation needs a probe");
    }
    const auto edited = apply_strategy(strategy, eval.x, ctx);
    auto rep = evaluate_edited(strategy, eval, *ctx.probe, edited);
    if (strategy == Strategy::iti) {
        rep.iti_alpha = ctx.iti_alpha;
    }
    return rep;
}

ItiSweep sweep_iti(const EvalSet& eval, const Probe& probe, std::span<const double> direction,
                   std::span<const double> alphas) {
    ItiSweep sweep;
    bool have_best = false;
    for (double a : alphas) {
        StrategyContext ctx;
        ctx.probe = &probe;
        ctx.iti_direction = direction;
        ctx.iti_alpha = a;
        sweep.reports.push_back(evaluate_strategy(Strategy::iti, eval, ctx));
        const auto& sel = sweep.reports.back().selectivity;
        if (sel && (!have_best || *sel > *sweep.reports[sweep.best].selectivity)) {
            sweep.best = sweep.reports.size() - 1;
            have_best = true;
        }
    }
    return sweep;
}

AblationResult ablate_static_vs_adaptive(const EvalSet& eval, const Probe& probe, const HNodeConfig& config) {
    MatrixD fixed(eval.x.rows(), eval.x.cols());
    MatrixD weighted(eval.x.rows(), eval.x.cols());
    for (std::size_t i = 0; i < eval.x.rows(); ++i) {
        const auto row = eval.x.row(i);
        const auto s = attenuate_adaptive(row, config, 1.0);
        const auto a = attenuate_adaptive(row, config, probe.confidence(row));
        std::copy(s.begin(), s.end(), fixed.row(i).begin());
        std::copy(a.begin(), a.end(), weighted.row(i).begin());
    }
    AblationResult out;
    out.static_report = evaluate_edited(Strategy::hook, eval, probe, fixed);
    out.adaptive_report = evaluate_edited(Strategy::hook, eval, probe, weighted);
    out.drift_reduction_pct = drift_reduction_pct(out.static_report.drift, out.adaptive_report.drift);
    return out;
}

std::vector<PercentilePoint> sweep_percentiles(const EvalSet& eval, const Probe& probe, const HNodeConfig& config,
                                               const MatrixD& grounded_full, std::span<const double> percentiles) {
    std::vector<PercentilePoint> out;
    for (double p : percentiles) {
        const auto cfg = with_percentile(config, grounded_full, p);
        StrategyContext ctx;
        ctx.probe = &probe;
        ctx.config = &cfg;
        PercentilePoint pt;
        pt.percentile = p;
        pt.report = evaluate_strategy(Strategy::pct_hnode, eval, ctx);
        pt.separation = pt.report.mean_conf_hallucinated_after - pt.report.mean_conf_grounded_after;
        out.push_back(std::move(pt));
    }
    return out;
}

} // namespace aac
