#include <algorithm>
#include <cmath>
#include <numbers>

#include "aac/cancellation.hpp"
#include "aac/kernels.hpp"
#include "test_util.hpp"

using namespace aac;
using aac::test::expect_error;

namespace {

// h_nodes {1, 3, 5, 7}, anti_nodes {0, 2} on d = 10.
HNodeConfig small_config() {
    HNodeConfig c;
    c.k = 4;
    c.h_nodes = {1, 3, 5, 7};
    c.anti_nodes = {0, 2};
    c.baseline = {0.5, -0.2, 1.0, 0.0};
    c.anti_baseline = {0.1, -0.3};
    c.grounded_mean = {0.2, -0.4, 0.6, -0.1};
    c.alpha = 0.9;
    c.theta = 0.45;
    return c;
}

std::vector<double> random_h(Rng& rng, std::size_t d = 10) {
    std::vector<double> h(d);
    for (auto& v : h) {
        v = rng.normal(0.0, 1.5);
    }
    return h;
}

bool is_listed(const HNodeConfig& c, std::size_t j) {
    return std::count(c.h_nodes.begin(), c.h_nodes.end(), j) + std::count(c.anti_nodes.begin(), c.anti_nodes.end(), j) >
           0;
}

std::vector<double> unit(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) {
        n += x * x;
    }
    n = std::sqrt(n);
    for (auto& x : v) {
        x /= n;
    }
    return v;
}

CancellationReport fixture_report(double reduc, double drift) {
    // Two hallucinated and two grounded samples with the requested mean shifts.
    return summarize(Strategy::pct_hnode, {0.8, 0.6, 0.3, 0.2}, {0.8 - reduc, 0.6 - reduc, 0.3 - drift, 0.2 - drift},
                     std::vector<int>{1, 1, 0, 0}, 0.0);
}

} // namespace

TEST(Excess, Examples) {
    EXPECT_EQ(excess(std::vector<double>{1, 2}, std::vector<double>{1, 2}), (std::vector<double>{0, 0}));
    EXPECT_EQ(excess(std::vector<double>{5, 1}, std::vector<double>{3, 2}), (std::vector<double>{2, 0}));
    Rng rng(1);
    const auto h = random_h(rng), b = random_h(rng);
    const auto e = excess(h, b);
    for (std::size_t i = 0; i < h.size(); ++i) {
        EXPECT_EQ(e[i], std::max(h[i] - b[i], 0.0));
    }
    expect_error([] { excess(std::vector<double>{1}, std::vector<double>{1, 2}); }, ErrorKind::data, "shape_mismatch");
}

TEST(CancelPct, Examples) {
    const auto c = small_config();
    std::vector<double> low(10, -5.0);
    EXPECT_EQ(cancel_pct(low, c, c.alpha), low);

    std::vector<double> h(10, 0.0);
    for (std::size_t r = 0; r < 4; ++r) {
        h[c.h_nodes[r]] = c.baseline[r] + 1.0;
    }
    const auto out = cancel_pct(h, c, 0.9);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_NEAR(out[c.h_nodes[r]], c.baseline[r] + 0.1, 1e-12);
    }

    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto hr = random_h(rng);
        const auto a = cancel_pct(hr, c, 1.0);
        const auto z = cancel_zero(hr, c);
        for (std::size_t j = 0; j < 10; ++j) {
            EXPECT_NEAR(a[j], z[j], 1e-15 * (1.0 + std::abs(z[j])));
        }
    }
}

TEST(CancelMean, Examples) {
    const auto c = small_config();
    std::vector<double> low(10, -5.0);
    EXPECT_EQ(cancel_mean(low, c), low);

    // Where the grounded mean sits below the baseline the mean edit suppresses more.
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto h = random_h(rng);
        const auto m = cancel_mean(h, c);
        const auto p = cancel_pct(h, c, c.alpha);
        double sm = 0.0, sp = 0.0;
        for (std::size_t j = 0; j < 10; ++j) {
            sm += std::abs(h[j] - m[j]);
            sp += std::abs(h[j] - p[j]);
        }
        EXPECT_GE(sm, sp);
    }
}

TEST(CancelAmplify, AntiNodes) {
    const auto c = small_config();
    std::vector<double> h(10, -5.0);
    h[0] = c.anti_baseline[0] + 2.0; // above baseline, untouched
    h[2] = c.anti_baseline[1] - 1.0;
    const auto out = cancel_amplify(h, c);
    EXPECT_EQ(out[0], h[0]);
    EXPECT_NEAR(out[2], c.anti_baseline[1] - 0.1, 1e-12);
}

TEST(CancelFourier, Examples) {
    const auto c = small_config();
    std::vector<double> low(10, -5.0);
    EXPECT_EQ(cancel_fourier(low, c), low);

    std::vector<double> h(10, 0.0);
    for (std::size_t r = 0; r < 4; ++r) {
        h[c.h_nodes[r]] = c.baseline[r] + 0.3;
    }
    const auto out = cancel_fourier(h, c);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_NEAR(out[c.h_nodes[r]], h[c.h_nodes[r]] - 0.9 * 0.3, 1e-12);
    }

    // Below the gate nothing changes.
    for (std::size_t r = 0; r < 4; ++r) {
        h[c.h_nodes[r]] = c.baseline[r] + 0.005;
    }
    EXPECT_EQ(cancel_fourier(h, c), h);
}

TEST(CancelFourier, KnownSpectrumOverFiftyNodes) {
    const std::size_t k = 50;
    HNodeConfig c;
    c.k = k;
    for (std::size_t r = 0; r < k; ++r) {
        c.h_nodes.push_back(r);
        c.anti_nodes.push_back(k + r);
        c.baseline.push_back(0.0);
        c.anti_baseline.push_back(0.0);
        c.grounded_mean.push_back(0.0);
    }
    std::vector<double> e(k);
    for (std::size_t t = 0; t < k; ++t) {
        const double x = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(k);
        e[t] = 3.0 + std::cos(2 * x) + 0.5 * std::sin(5 * x) + 0.25 * std::cos(11 * x + 0.3);
    }
    const auto smooth = spectral_top_k(e, kFourierComponents);
    double err = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
        err += (smooth[t] - e[t]) * (smooth[t] - e[t]);
    }
    EXPECT_LT(std::sqrt(err), 1e-9);

    std::vector<double> h(2 * k, -1.0);
    std::copy(e.begin(), e.end(), h.begin());
    const auto out = cancel_fourier(h, c);
    for (std::size_t t = 0; t < k; ++t) {
        EXPECT_NEAR(out[t], e[t] - c.alpha * e[t], 1e-9);
    }
}

TEST(CancelIti, Examples) {
    const auto d = unit({1, 2, 0, -1});
    const std::vector<double> orth = {2, -1, 5, 0};
    EXPECT_EQ(cancel_iti(orth, d, 10.0), orth);
    const auto z = cancel_iti(d, d, 1.0);
    for (double v : z) {
        EXPECT_NEAR(v, 0.0, 1e-15);
    }
    expect_error([&] { cancel_iti(orth, std::vector<double>{1, 1, 0, 0}, 1.0); }, ErrorKind::data,
                 "non_unit_direction");
}

TEST(CancelIti, Linearity) {
    Rng rng(4);
    const auto d = unit(random_h(rng));
    for (int t = 0; t < 20; ++t) {
        const auto a = random_h(rng), b = random_h(rng);
        std::vector<double> sum(10);
        for (std::size_t j = 0; j < 10; ++j) {
            sum[j] = 2.0 * a[j] - 3.0 * b[j];
        }
        const auto fa = cancel_iti(a, d, 0.7), fb = cancel_iti(b, d, 0.7), fs = cancel_iti(sum, d, 0.7);
        for (std::size_t j = 0; j < 10; ++j) {
            EXPECT_NEAR(fs[j], 2.0 * fa[j] - 3.0 * fb[j], 1e-12);
        }
        const auto twice = cancel_iti(cancel_iti(a, d, 0.3), d, 0.6);
        const auto once = cancel_iti(a, d, 1.0 - (1.0 - 0.3) * (1.0 - 0.6));
        for (std::size_t j = 0; j < 10; ++j) {
            EXPECT_NEAR(twice[j], once[j], 1e-12);
        }
    }
}

TEST(Strategies, LocalityAndContractivity) {
    const auto c = small_config();
    Rng rng(5);
    const auto d = unit(random_h(rng));
    Probe probe;
    probe.weights.assign(10, 0.3);
    StrategyContext ctx{&probe, &c, d, 10.0};
    for (int t = 0; t < 100; ++t) {
        MatrixD x(1, 10, random_h(rng));
        for (Strategy s : post_hoc_strategies()) {
            const auto out = apply_strategy(s, x, ctx);
            for (std::size_t j = 0; j < 10; ++j) {
                if (!is_listed(c, j)) {
                    EXPECT_EQ(out(0, j), x(0, j)) << to_string(s);
                }
            }
        }
        for (Strategy s : {Strategy::pct_hnode, Strategy::pct_zero, Strategy::mean}) {
            const auto out = apply_strategy(s, x, ctx);
            for (std::size_t r = 0; r < c.h_nodes.size(); ++r) {
                const auto j = c.h_nodes[r];
                const double ref = s == Strategy::mean ? c.grounded_mean[r] : c.baseline[r];
                EXPECT_LE(std::abs(out(0, j) - ref), std::abs(x(0, j) - ref) + 1e-15);
            }
        }
    }
}

TEST(Strategies, ParallelMatchesSerial) {
    const auto c = small_config();
    Rng rng(6);
    const auto x = test::random_matrix(rng, 301, 10, 1.5);
    const auto d = unit(random_h(rng));
    Probe probe;
    probe.weights = random_h(rng);
    StrategyContext ctx{&probe, &c, d, 10.0};
    kernels::set_threads(3);
    for (Strategy s : {Strategy::mean, Strategy::pct_hnode, Strategy::pct_amplify, Strategy::pct_fourier,
                       Strategy::pct_zero, Strategy::hook, Strategy::iti}) {
        const auto a = apply_strategy(s, x, ctx), b = apply_strategy_serial(s, x, ctx);
        EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin())) << to_string(s);
    }
    kernels::set_threads(1);
}

TEST(Strategies, ParseNames) {
    EXPECT_EQ(parse_strategy("pct_fourier"), Strategy::pct_fourier);
    expect_error([] { parse_strategy("bogus"); }, ErrorKind::config, "unknown_strategy");
}

TEST(Metrics, IdentityStrategy) {
    const auto rep = summarize(Strategy::mean, {0.9, 0.2}, {0.9, 0.2}, std::vector<int>{1, 0}, 0.0);
    EXPECT_EQ(rep.reduc, 0.0);
    EXPECT_EQ(rep.drift, 0.0);
    EXPECT_EQ(rep.sep_delta, 0.0);
    EXPECT_FALSE(rep.selectivity.has_value());
}

TEST(Metrics, PublishedSelectivityFixtures) {
    struct Row {
        double reduc, drift, printed;
    };
    for (const Row& row : {Row{0.0731, 0.0222, 3.29}, Row{0.0100, 0.0058, 1.72}, Row{0.0105, 0.0019, 5.54},
                           Row{0.0067, 0.0012, 5.58}}) {
        const auto rep = fixture_report(row.reduc, row.drift);
        EXPECT_NEAR(rep.reduc, row.reduc, 1e-12);
        EXPECT_NEAR(rep.drift, row.drift, 1e-12);
        ASSERT_TRUE(rep.selectivity.has_value());
        EXPECT_NEAR(*rep.selectivity, row.printed, 0.05);
    }
}

TEST(Metrics, SuppressionPercentAndSeparation) {
    const auto rep = summarize(Strategy::mean, {0.8, 0.4}, {0.6, 0.4}, std::vector<int>{1, 0}, 1.5);
    EXPECT_NEAR(rep.supp_pct, 100.0 * (0.6 - 0.5) / 0.6, 1e-12);
    EXPECT_NEAR(rep.sep_delta, (0.6 - 0.4) - (0.8 - 0.4), 1e-12);
    EXPECT_EQ(rep.l1_suppression, 1.5);
}

TEST(Ablation, PublishedDriftReduction) {
    const auto pct = drift_reduction_pct(0.0124, 0.0074);
    ASSERT_TRUE(pct.has_value());
    EXPECT_NEAR(*pct, 40.3, 1.0);
    EXPECT_NEAR(*pct, 40.1, 1.0);
}

TEST(Ablation, ConfidenceOneMakesStaticAndAdaptiveEqual) {
    const auto c = small_config();
    Probe probe;
    probe.weights.assign(10, 0.0);
    probe.bias = 1000.0; // sigmoid saturates at exactly 1
    Rng rng(7);
    EvalSet eval{test::random_matrix(rng, 40, 10, 1.5), {}};
    for (std::size_t i = 0; i < 40; ++i) {
        eval.labels.push_back(static_cast<int>(i % 2));
    }
    const auto ab = ablate_static_vs_adaptive(eval, probe, c);
    EXPECT_EQ(ab.static_report.after, ab.adaptive_report.after);
    EXPECT_EQ(ab.static_report.l1_suppression, ab.adaptive_report.l1_suppression);
}

TEST(Ablation, AdaptiveDriftNeverExceedsStatic) {
    const auto c = small_config();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        Probe probe;
        probe.weights = random_h(rng);
        for (auto& w : probe.weights) {
            w = std::abs(w); // raising an activation never lowers confidence
        }
        EvalSet eval{test::random_matrix(rng, 60, 10, 1.5), {}};
        for (std::size_t i = 0; i < 60; ++i) {
            eval.labels.push_back(static_cast<int>(i % 2));
        }
        const auto ab = ablate_static_vs_adaptive(eval, probe, c);
        EXPECT_LE(ab.adaptive_report.drift, ab.static_report.drift + 1e-15);
        EXPECT_LE(ab.adaptive_report.l1_suppression, ab.static_report.l1_suppression);
    }
}

TEST(PercentileSweep, SuppressionNonIncreasing) {
    Rng rng(8);
    const auto grounded = test::random_matrix(rng, 50, 10);
    EvalSet eval{test::random_matrix(rng, 40, 10, 2.0), {}};
    for (std::size_t i = 0; i < 40; ++i) {
        eval.labels.push_back(static_cast<int>(i % 2));
    }
    Probe probe;
    probe.weights = random_h(rng);
    auto c = small_config();
    c = with_percentile(c, grounded, 80);
    const auto sweep = sweep_percentiles(eval, probe, c, grounded);
    ASSERT_EQ(sweep.size(), kPercentileGrid.size());
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        EXPECT_LE(sweep[i].report.l1_suppression, sweep[i - 1].report.l1_suppression);
    }
}

TEST(InferenceTimeIntervention, DirectionIsUnitClassMeanDifference) {
    MatrixD x(4, 2, std::vector<double>{0, 0, 2, 0, 0, 3, 2, 3});
    const auto d = iti_direction(x, std::vector<int>{0, 0, 1, 1});
    // hallucinated mean (1, 3), grounded mean (1, 0)
    EXPECT_NEAR(d[0], 0.0, 1e-15);
    EXPECT_NEAR(d[1], 1.0, 1e-15);
}
