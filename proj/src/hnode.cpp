#include "aac/hnode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aac {

HNodeSelection select_hnodes(std::span<const double> weights, std::size_t k) {
    const std::size_t d = weights.size();
    if (k == 0 || 2 * k > d) {
        fail(ErrorKind::config, "k_too_large",
             "k must be in [1, d/2]; got k=" + std::to_string(k) + " with d=" + std::to_string(d));
    }
    for (double w : weights) {
        if (!std::isfinite(w)) {
            fail(ErrorKind::data, "non_finite", "probe weights contain non-finite values");
        }
    }
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);

    HNodeSelection out;
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return weights[a] != weights[b] ? weights[a] > weights[b] : a < b;
                      });
    out.h_nodes.assign(order.begin(), order.begin() + static_cast<long>(k));

    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return weights[a] != weights[b] ? weights[a] < weights[b] : a < b;
                      });
    out.anti_nodes.assign(order.begin(), order.begin() + static_cast<long>(k));
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) {
        fail(ErrorKind::data, "empty_grounded_set", "percentile of an empty set");
    }
    if (!(p > 0.0 && p < 100.0)) {
        fail(ErrorKind::config, "bad_percentile", "percentile must lie in (0, 100)");
    }
    std::sort(values.begin(), values.end());
    const double pos = static_cast<double>(values.size() - 1) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= values.size() || frac == 0.0) {
        return values[lo];
    }
    const double a = values[lo];
    const double b = values[lo + 1];
    // Clamp keeps the estimate monotone in p under rounding.
    return std::min(a + frac * (b - a), b);
}

std::vector<double> percentile_baseline(const MatrixD& grounded, double p) {
    if (grounded.rows() == 0) {
        fail(ErrorKind::data, "empty_grounded_set", "no grounded samples to build a baseline from");
    }
    std::vector<double> out(grounded.cols());
    std::vector<double> column(grounded.rows());
    for (std::size_t j = 0; j < grounded.cols(); ++j) {
        for (std::size_t i = 0; i < grounded.rows(); ++i) {
            column[i] = grounded(i, j);
        }
        out[j] = percentile(column, p);
    }
    return out;
}

void HNodeConfig::validate(std::size_t hidden_dim) const {
    auto bad = [](const std::string& msg) { fail(ErrorKind::config, "bad_hnode_config", msg); };
    if (h_nodes.size() != baseline.size() || anti_nodes.size() != anti_baseline.size() ||
        h_nodes.size() != grounded_mean.size()) {
        bad("node and baseline lengths differ");
    }
    for (auto j : h_nodes) {
        if (j >= hidden_dim) bad("h_node index out of range");
        if (std::find(anti_nodes.begin(), anti_nodes.end(), j) != anti_nodes.end()) bad("h_nodes and anti_nodes overlap");
    }
    for (auto j : anti_nodes) {
        if (j >= hidden_dim) bad("anti_node index out of range");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) bad("alpha must lie in (0, 1]");
    if (!(theta > 0.0 && theta <= 1.0)) bad("theta must lie in (0, 1]");
    if (!(percentile > 0.0 && percentile < 100.0)) bad("percentile must lie in (0, 100)");
}

MatrixD grounded_cancel_features(const ActivationDataset& dataset, const SplitAssignment& splits, std::size_t layer) {
    std::vector<std::size_t> grounded;
    for (auto i : splits.indices(Split::cancel)) {
        if (dataset.samples[i].label == 0) {
            grounded.push_back(i);
        }
    }
    return gather_features(dataset, grounded, layer, Pooling::last_token);
}

namespace {

MatrixD select_columns(const MatrixD& m, std::span<const std::size_t> cols) {
    MatrixD out(m.rows(), cols.size());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out(i, c) = m(i, cols[c]);
        }
    }
    return out;
}

std::vector<double> column_means(const MatrixD& m) {
    if (m.rows() == 0) {
        fail(ErrorKind::data, "empty_grounded_set", "no grounded samples to average");
    }
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out[j] += m(i, j);
        }
    }
    for (auto& v : out) {
        v /= static_cast<double>(m.rows());
    }
    return out;
}

} // namespace

HNodeConfig with_percentile(const HNodeConfig& config, const MatrixD& grounded_full, double p) {
    HNodeConfig out = config;
    out.percentile = p;
    out.baseline = percentile_baseline(select_columns(grounded_full, out.h_nodes), p);
    out.anti_baseline = percentile_baseline(select_columns(grounded_full, out.anti_nodes), p);
    return out;
}

HNodeConfig build_hnode_config(const Probe& probe, const ActivationDataset& dataset, const SplitAssignment& splits,
                               const HNodeParams& params) {
    const auto selection = select_hnodes(probe.weights, params.k);
    const auto grounded = grounded_cancel_features(dataset, splits, probe.layer);
    if (grounded.rows() < 2) {
        fail(ErrorKind::data, "empty_grounded_set", "cancel split needs at least 2 grounded samples");
    }
    HNodeConfig config;
    config.layer = probe.layer;
    config.h_nodes = selection.h_nodes;
    config.anti_nodes = selection.anti_nodes;
    config.k = params.k;
    config.alpha = params.alpha;
    config.theta = params.theta;
    config.grounded_mean = column_means(select_columns(grounded, config.h_nodes));
    config = with_percentile(config, grounded, params.percentile);
    config.validate(dataset.hidden_dim);
    return config;
}

std::vector<NeuronProfile> profile_hnodes(const HNodeConfig& config, const Probe& probe,
                                          const ActivationDataset& dataset, const SplitAssignment& splits,
                                          std::size_t top_m) {
    const auto eval = splits.indices(Split::eval);
    const std::size_t m = std::min(top_m, config.h_nodes.size());
    std::vector<NeuronProfile> out;
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t j = config.h_nodes[r];
        NeuronProfile p;
        p.rank = r + 1;
        p.neuron = j;
        p.weight = probe.weights.at(j);
        double sum_h = 0.0, sum_g = 0.0;
        std::size_t n_h = 0, n_g = 0;
        bool have_max = false;
        for (auto i : eval) {
            const auto& rec = dataset.samples[i];
            const double v = dataset.vector(i, config.layer, Pooling::last_token)[j];
            if (rec.label == 1) {
                sum_h += v;
                ++n_h;
                if (!have_max || v > p.max_activation) {
                    have_max = true;
                    p.max_activation = v;
                    p.max_prompt_id = rec.prompt_id;
                    p.max_excerpt = rec.prompt_excerpt;
                }
            } else {
                sum_g += v;
                ++n_g;
            }
        }
        if (n_h == 0 || n_g == 0) {
            fail(ErrorKind::data, "single_class_eval", "profiling needs both classes in the eval split");
        }
        p.hallucinated_mean = sum_h / static_cast<double>(n_h);
        p.grounded_mean = sum_g / static_cast<double>(n_g);
        p.gap = p.hallucinated_mean - p.grounded_mean;
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace aac
