#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include "aac/anc.hpp"
#include "aac/cancellation.hpp"
#include "aac/evaluation.hpp"
#include "aac/hook.hpp"
#include "aac/kernels.hpp"
#include "aac/pipeline.hpp"
#include "aac/planted.hpp"
#include "aac/rng.hpp"

using namespace aac;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

struct Planted {
    ToyTransformer model;
    Workspace ws;
    LayerSweepResult sweep;
    Probe probe;
    HNodeConfig config;

    explicit Planted(std::uint64_t seed, std::size_t n = 600)
        : model(toy_config_for(seed)), ws(make_workspace(make_planted_corpus(model, seed, n).dataset)) {
        sweep = sweep_layers(ws.dataset, ws.splits, 1.0);
        probe = sweep.last_token_probes.at(sweep.best_layer);
        PipelineConfig pc;
        config = fit_hnodes(ws, probe, pc);
    }
};

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

// Published (Reduc, Drift, Sel) triples.
struct Triple {
    const char* label;
    double reduc, drift, sel;
};

Outcome metric_fixtures() {
    const std::vector<Triple> rows = {
        {"opt125m/mean", 0.0731, 0.0222, 3.29},       {"opt125m/pct80", 0.0259, 0.0074, 3.48},
        {"opt125m/amplify", 0.0393, 0.0114, 3.44},    {"opt125m/fourier", 0.0133, 0.0032, 4.20},
        {"opt125m/zero", 0.0467, 0.0138, 3.37},       {"opt125m/hook", -0.0073, 0.0281, -0.26},
        {"phi3mini/mean", 0.0216, 0.0143, 1.51},      {"phi3mini/pct80", 0.0069, 0.0045, 1.51},
        {"phi3mini/amplify", 0.0100, 0.0058, 1.72},   {"phi3mini/fourier", 0.0041, 0.0028, 1.48},
        {"phi3mini/zero", 0.0111, 0.0079, 1.40},      {"phi3mini/hook", 0.0338, 0.0345, 0.98},
        {"llama3-8b/mean", 0.0190, 0.0038, 5.06},     {"llama3-8b/pct80", 0.0067, 0.0012, 5.58},
        {"llama3-8b/amplify", 0.0106, 0.0020, 5.42},  {"llama3-8b/fourier", 0.0047, 0.0009, 5.39},
        {"llama3-8b/zero", 0.0105, 0.0019, 5.54},     {"llama3-8b/hook", 0.0502, 0.0371, 1.35},
        {"pct-sweep/50", 0.0736, 0.0224, 3.28},       {"pct-sweep/60", 0.0565, 0.0170, 3.32},
        {"pct-sweep/70", 0.0401, 0.0119, 3.37},       {"pct-sweep/75", 0.0329, 0.0096, 3.42},
        {"pct-sweep/80", 0.0259, 0.0074, 3.48},       {"pct-sweep/85", 0.0205, 0.0056, 3.66},
        {"pct-sweep/90", 0.0148, 0.0037, 3.98},       {"pct-sweep/95", 0.0083, 0.0017, 4.78},
        {"pct-sweep/99", 0.0026, 0.0003, 8.57},       {"ablation/opt125m/static", 0.0421, 0.0124, 3.39},
        {"ablation/opt125m/adaptive", 0.0259, 0.0074, 3.48}, {"ablation/phi3mini/static", 0.0190, 0.0128, 1.49},
        {"ablation/phi3mini/adaptive", 0.0148, 0.0092, 1.62}, {"ablation/llama3-8b/static", 0.0244, 0.0042, 5.83},
        {"ablation/llama3-8b/adaptive", 0.0184, 0.0031, 5.94},
    };
    int bad = 0, interval_ok = 0;
    std::string detail;
    for (const auto& r : rows) {
        const double sel = *selectivity(r.reduc, r.drift);
        if (std::abs(sel - r.sel) <= 0.05 + 1e-12) {
            continue;
        }
        ++bad;
        // Inputs printed to 4 decimals, Sel to 2: is the printed Sel reachable?
        const double h = 5e-5;
        const double a = (r.reduc - h) / (r.drift + h), b = (r.reduc + h) / (r.drift - h);
        const bool reachable = r.sel + 0.005 >= std::min(a, b) && r.sel - 0.005 <= std::max(a, b);
        interval_ok += reachable ? 1 : 0;
        char buf[200];
        std::snprintf(buf, sizeof buf, "\n    %s: %.4f/%.4f = %.3f vs printed %.2f (|diff| %.3f; rounding interval [%.2f, %.2f] %s)",
                      r.label, r.reduc, r.drift, sel, r.sel, std::abs(sel - r.sel), std::min(a, b), std::max(a, b),
                      reachable ? "contains printed" : "excludes printed");
        detail += buf;
    }
    return {bad == 0, std::to_string(rows.size() - bad) + "/" + std::to_string(rows.size()) +
                          " triples within +-0.05; " + std::to_string(interval_ok) + "/" + std::to_string(bad) +
                          " outliers consistent with input rounding" + detail};
}

Outcome probe_soundness() {
    double worst_auc = 1.0, null_lo = 1.0, null_hi = 0.0;
    for (auto seed : kSeeds) {
        const ToyTransformer model(toy_config_for(seed));
        auto ds = make_planted_corpus(model, seed, 600).dataset;
        const Workspace ws = make_workspace(ds);
        const auto sweep = sweep_layers(ws.dataset, ws.splits, 1.0);
        worst_auc = std::min(worst_auc, sweep.layers[sweep.best_layer].last_token_auc);

        auto labels = ds.labels();
        Rng rng(derive_seed(seed, "label-permutation"));
        for (std::size_t i = labels.size(); i > 1; --i) {
            std::swap(labels[i - 1], labels[rng.below(i)]);
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
            ds.samples[i].label = labels[i];
        }
        const Workspace null_ws = make_workspace(std::move(ds));
        const auto null_sweep = sweep_layers(null_ws.dataset, null_ws.splits, 1.0);
        const double a = null_sweep.layers[null_sweep.best_layer].last_token_auc;
        null_lo = std::min(null_lo, a);
        null_hi = std::max(null_hi, a);
    }
    const bool pass = worst_auc >= 0.95 && null_lo >= 0.35 && null_hi <= 0.65;
    char buf[200];
    std::snprintf(buf, sizeof buf, "min best-layer AUC %.4f (>= 0.95); permuted best-layer AUC in [%.4f, %.4f] (within [0.35, 0.65])",
                  worst_auc, null_lo, null_hi);
    return {pass, buf};
}

Outcome gradient_check() {
    Rng rng(99);
    const std::size_t n = 40, d = 12;
    MatrixD x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x(i, j) = rng.normal();
        }
        y[i] = static_cast<int>(i % 2);
    }
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> w(d);
        for (auto& v : w) {
            v = rng.normal(0.0, 0.5);
        }
        const double b = rng.normal(0.0, 0.5);
        const double lambda = rng.uniform(0.0, 2.0);
        std::vector<double> g(d);
        const double gb = probe_gradient(x, y, w, b, lambda, g);
        const double eps = 1e-6;
        std::vector<double> fd(d + 1), an(g);
        an.push_back(gb);
        for (std::size_t j = 0; j <= d; ++j) {
            auto wp = w, wm = w;
            double bp = b, bm = b;
            if (j < d) {
                wp[j] += eps;
                wm[j] -= eps;
            } else {
                bp += eps;
                bm -= eps;
            }
            fd[j] = (probe_objective(x, y, wp, bp, lambda) - probe_objective(x, y, wm, bm, lambda)) / (2 * eps);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j <= d; ++j) {
            num += (an[j] - fd[j]) * (an[j] - fd[j]);
            den += an[j] * an[j];
        }
        worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
    }
    return {worst < 1e-4, fmt("max relative error %.3e over 10 points (< 1e-4)", worst)};
}

Outcome selectivity_property() {
    double worst = 1e300;
    std::string per_seed;
    for (auto seed : kSeeds) {
        const Planted p(seed);
        const auto eval = make_eval_set(p.ws.dataset, p.ws.splits, p.config.layer);
        StrategyContext ctx{&p.probe, &p.config, {}, 10.0};
        const auto r = evaluate_strategy(Strategy::pct_hnode, eval, ctx);
        const double sel = r.selectivity ? *r.selectivity : -1e300;
        worst = std::min(worst, sel);
        per_seed += fmt(" %.1f", sel);
    }
    return {worst > 1.0, "pct_hnode Sel per seed:" + per_seed + " (all > 1)"};
}

Outcome suppression_monotonicity() {
    const Planted p(1);
    const auto eval = make_eval_set(p.ws.dataset, p.ws.splits, p.config.layer);
    const auto points =
        sweep_percentiles(eval, p.probe, p.config, grounded_cancel_features(p.ws.dataset, p.ws.splits, p.config.layer));
    bool ok = points.size() == kPercentileGrid.size();
    std::string values;
    for (std::size_t i = 0; i < points.size(); ++i) {
        values += fmt(" %.2f", points[i].report.l1_suppression);
        if (i > 0 && points[i].report.l1_suppression > points[i - 1].report.l1_suppression) {
            ok = false;
        }
    }
    return {ok, "L1 suppression over {50..99}:" + values + " (non-increasing, exact)"};
}

Outcome surgical_identity() {
    const Planted p(2);
    const auto prompts = dataset_prompts(p.ws.dataset, 40);
    HookSpec surgical = make_hook_spec(p.ws, p.probe, p.config, HookMode::adaptive);
    surgical.config.theta = 1.0;
    HookSpec off = make_hook_spec(p.ws, p.probe, p.config, HookMode::off);
    bool ok = true;
    std::size_t compared = 0;
    for (const auto& prompt : prompts) {
        const auto plain = generate(p.model, prompt, 30, nullptr);
        ok = ok && generate(p.model, prompt, 30, &surgical).tokens == plain.tokens;
        ok = ok && generate(p.model, prompt, 30, &off).tokens == plain.tokens;
        ++compared;
    }
    const auto texts = make_synthetic_text(2, 20, 64);
    for (const auto& t : texts) {
        const double base = perplexity(p.model, t, nullptr);
        ok = ok && perplexity(p.model, t, &surgical) == base && perplexity(p.model, t, &off) == base;
        const std::span<const int> s(t);
        ok = ok && continuation_log_probs(p.model, s.first(1), s.subspan(1), &surgical) ==
                       continuation_log_probs(p.model, s.first(1), s.subspan(1), nullptr);
    }
    return {ok, std::to_string(compared) + " generations and " + std::to_string(texts.size()) +
                    " perplexities bit-identical for theta=1.0 and mode=off"};
}

Outcome hook_locality() {
    const Planted p(3);
    bool ok = true;
    std::size_t fired = 0, h_changed = 0;
    std::string layers;
    for (std::size_t layer : {p.sweep.best_layer, std::size_t{2}}) {
        const Probe& probe = p.sweep.last_token_probes.at(layer);
        PipelineConfig pc;
        const HNodeConfig cfg = fit_hnodes(p.ws, probe, pc);
        const HookSpec spec = make_hook_spec(p.ws, probe, cfg, HookMode::adaptive);
        std::vector<bool> is_h(p.model.config().d_model, false);
        for (auto j : cfg.h_nodes) {
            is_h[j] = true;
        }
        layers += " " + std::to_string(layer);
        for (const auto& prompt : dataset_prompts(p.ws.dataset, 60)) {
            // Teacher-force the unhooked greedy continuation so prefixes match.
            const auto plain = generate(p.model, prompt, 10, nullptr);
            std::vector<int> seq(prompt);
            seq.insert(seq.end(), plain.tokens.begin(), plain.tokens.end() - 1);
            Session a(p.model), b(p.model);
            CancellationHook hook(spec);
            for (std::size_t t = 0; t < seq.size(); ++t) {
                const auto ra = a.step(seq[t]);
                const bool hooked = t + 1 >= prompt.size();
                const auto rb = hooked ? b.step(seq[t], &hook) : b.step(seq[t]);
                if (!hooked) {
                    continue;
                }
                const bool did_fire = hook.steps().back().fired;
                fired += did_fire ? 1 : 0;
                for (std::size_t j = 0; j < is_h.size(); ++j) {
                    const float u = ra.hidden(layer, j), v = rb.hidden(layer, j);
                    if (!is_h[j] && std::memcmp(&u, &v, sizeof u) != 0) {
                        ok = false;
                    }
                    if (is_h[j] && u != v) {
                        ++h_changed;
                    }
                }
            }
        }
    }
    ok = ok && fired > 0 && h_changed > 0;
    return {ok, "hook layers" + layers + ": " + std::to_string(fired) + " firing steps, " +
                    std::to_string(h_changed) + " H-Node edits, non-H coordinates bit-identical"};
}

Outcome fourier_equivalence() {
    Rng rng(7);
    double worst = 0.0;
    const std::size_t d = 128, k = 50;
    constexpr double kPi = 3.14159265358979323846;
    for (int trial = 0; trial < 20; ++trial) {
        HNodeConfig cfg;
        cfg.k = k;
        cfg.alpha = rng.uniform(0.1, 1.0);
        std::vector<std::size_t> perm(d);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = d; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.below(i)]);
        }
        cfg.h_nodes.assign(perm.begin(), perm.begin() + k);
        cfg.anti_nodes.assign(perm.begin() + k, perm.begin() + 2 * k);
        std::vector<double> h(d);
        for (auto& v : h) {
            v = rng.normal();
        }
        // Excess with a DC term plus up to four conjugate-pair components.
        const std::size_t pairs = 1 + rng.below(4);
        std::vector<double> e(k, 1.0 + rng.uniform(0.5, 1.0));
        for (std::size_t c = 0; c < pairs; ++c) {
            const double freq = static_cast<double>(1 + c * 5 + rng.below(5));
            const double amp = rng.uniform(0.05, 0.2), phase = rng.uniform(0.0, 2 * kPi);
            for (std::size_t j = 0; j < k; ++j) {
                e[j] += amp * std::cos(2 * kPi * freq * static_cast<double>(j) / static_cast<double>(k) + phase);
            }
        }
        for (std::size_t i = 0; i < k; ++i) {
            const double b = rng.normal();
            cfg.baseline.push_back(b);
            h[cfg.h_nodes[i]] = b + e[i];
            cfg.anti_baseline.push_back(rng.normal());
            cfg.grounded_mean.push_back(b);
        }
        const auto f = cancel_fourier(h, cfg);
        const auto p = cancel_pct(h, cfg, cfg.alpha);
        for (std::size_t j = 0; j < d; ++j) {
            worst = std::max(worst, std::abs(f[j] - p[j]));
        }
    }
    return {worst <= 1e-9, fmt("max |fourier - pct(alpha)| %.3e over 20 constructed spectra (<= 1e-9)", worst)};
}

Outcome lms_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    LmsFilter single(1, 0.01);
    Rng rng(11);
    for (int t = 0; t < 10000; ++t) {
        const double x = rng.normal();
        const double xs[1] = {x};
        single.step(xs, 0.5 * x);
    }
    const double w_err = std::abs(single.weights()[0] - 0.5);
    const auto anc = evaluate_anc(8, 0.001, 30000, 10000, 5);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = w_err <= 1e-3 && !anc.diverged && anc.reduction_db >= 20.0 && secs < 10.0;
    char buf[200];
    std::snprintf(buf, sizeof buf, "single-tap |w-0.5| = %.2e (<= 1e-3); ANC reduction %.2f dB (>= 20); %.2f s", w_err,
                  anc.reduction_db, secs);
    return {pass, buf};
}

Outcome iti_contract() {
    Rng rng(13);
    double worst_par = 0.0, worst_orth = 0.0;
    const std::size_t d = 64;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> h(d), dir(d);
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            h[j] = rng.normal();
            dir[j] = rng.normal();
            norm += dir[j] * dir[j];
        }
        for (auto& v : dir) {
            v /= std::sqrt(norm);
        }
        const double alpha = trial < 5 ? kItiAlphas[trial] : rng.uniform(-2.0, 30.0);
        const auto out = cancel_iti(h, dir, alpha);
        double ph = 0.0, po = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            ph += h[j] * dir[j];
            po += out[j] * dir[j];
        }
        worst_par = std::max(worst_par, std::abs(po - (1.0 - alpha) * ph));
        for (std::size_t j = 0; j < d; ++j) {
            worst_orth = std::max(worst_orth, std::abs((out[j] - po * dir[j]) - (h[j] - ph * dir[j])));
        }
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "parallel error %.2e, orthogonal error %.2e (both <= 1e-12)", worst_par, worst_orth);
    return {worst_par <= 1e-12 && worst_orth <= 1e-12, buf};
}

Outcome ablation_direction() {
    bool ok = true;
    std::string per_seed;
    for (auto seed : kSeeds) {
        const Planted p(seed);
        const auto eval = make_eval_set(p.ws.dataset, p.ws.splits, p.config.layer);
        const auto a = ablate_static_vs_adaptive(eval, p.probe, p.config);
        ok = ok && a.adaptive_report.drift <= a.static_report.drift;
        per_seed += a.drift_reduction_pct ? fmt(" %.1f%%", *a.drift_reduction_pct) : std::string(" n/a");
    }
    return {ok, "adaptive drift <= static drift on all seeds; drift reduction per seed:" + per_seed +
                    " (published 25.9-40.1%, non-binding at toy scale)"};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
    const auto root = std::filesystem::temp_directory_path() / "aac_acceptance_determinism";
    std::filesystem::remove_all(root);
    PipelineConfig pc;
    pc.seed = 4;
    pc.out_dir = (root / "a").string();
    const int threads = kernels::max_threads();
    const auto first = run_pipeline(pc);
    pc.out_dir = (root / "b").string();
    kernels::set_threads(3);
    const auto second = run_pipeline(pc);
    kernels::set_threads(threads);
    bool ok = first.size() == second.size();
    std::size_t same = 0;
    for (std::size_t i = 0; ok && i < first.size(); ++i) {
        if (slurp(first[i]) == slurp(second[i]) && first[i].filename() == second[i].filename()) {
            ++same;
        } else {
            ok = false;
        }
    }
    std::filesystem::remove_all(root);
    return {ok, std::to_string(same) + "/" + std::to_string(first.size()) +
                    " artifacts byte-identical across reruns (second run with 3 threads)"};
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {"metric_fixtures", metric_fixtures},       {"probe_soundness", probe_soundness},
        {"gradient_check", gradient_check},         {"selectivity", selectivity_property},
        {"suppression_monotonicity", suppression_monotonicity}, {"surgical_identity", surgical_identity},
        {"hook_locality", hook_locality},           {"fourier_equivalence", fourier_equivalence},
        {"lms_convergence", lms_convergence},       {"iti_contract", iti_contract},
        {"ablation_direction", ablation_direction}, {"determinism", determinism},
    };
    std::string only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--list") {
            for (const auto& c : criteria) {
                std::printf("%s\n", c.name);
            }
            return 0;
        }
        if (arg == "--only" && i + 1 < argc) {
            only = argv[++i];
        }
    }
    int failures = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && only != c.name) {
            continue;
        }
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %s (%.2fs): %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    if (ran == 0) {
        std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
