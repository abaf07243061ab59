#include "aac/probing.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "aac/kernels.hpp"

namespace aac {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

template <typename T>
double dot_bias(std::span<const double> w, double bias, std::span<const T> h) {
    if (h.size() != w.size()) {
        fail(ErrorKind::data, "shape_mismatch",
             "probe expects " + std::to_string(w.size()) + " features, got " + std::to_string(h.size()));
    }
    double acc = bias;
    for (std::size_t j = 0; j < w.size(); ++j) {
        acc += w[j] * static_cast<double>(h[j]);
    }
    return acc;
}

void check_training_inputs(const MatrixD& x, std::span<const int> y) {
    if (x.rows() != y.size()) {
        fail(ErrorKind::data, "shape_mismatch", "feature rows and label count differ");
    }
    if (x.rows() < 2) {
        fail(ErrorKind::data, "too_few_samples", "probe training needs at least 2 samples");
    }
    bool has0 = false, has1 = false;
    for (int label : y) {
        if (label != 0 && label != 1) {
            fail(ErrorKind::data, "bad_label", "labels must be 0/1");
        }
        (label == 1 ? has1 : has0) = true;
    }
    if (!has0 || !has1) {
        fail(ErrorKind::data, "degenerate_labels", "probe training needs both classes");
    }
    for (double v : x.data()) {
        if (!std::isfinite(v)) {
            fail(ErrorKind::data, "non_finite", "probe features contain non-finite values");
        }
    }
}

double sq_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return acc;
}

} // namespace

double Probe::logit(std::span<const double> h) const { return dot_bias(weights, bias, h); }
double Probe::logit(std::span<const float> h) const { return dot_bias(weights, bias, h); }
double Probe::confidence(std::span<const double> h) const { return sigmoid(logit(h)); }
double Probe::confidence(std::span<const float> h) const { return sigmoid(logit(h)); }

double probe_objective(const MatrixD& x, std::span<const int> y, std::span<const double> w, double bias,
                       double lambda) {
    std::vector<double> z(x.rows());
    kernels::logistic_margins(x, w, bias, z);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        loss += y[i] == 1 ? softplus(-z[i]) : softplus(z[i]);
    }
    return loss + lambda * sq_norm(w);
}

double probe_gradient(const MatrixD& x, std::span<const int> y, std::span<const double> w, double bias,
                      double lambda, std::span<double> grad_w) {
    std::vector<double> r(x.rows());
    kernels::logistic_margins(x, w, bias, r);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] = sigmoid(r[i]) - static_cast<double>(y[i]);
        grad_b += r[i];
    }
    kernels::weighted_column_sums(x, r, grad_w);
    for (std::size_t j = 0; j < grad_w.size(); ++j) {
        grad_w[j] += 2.0 * lambda * w[j];
    }
    return grad_b;
}

Probe train_probe(const MatrixD& x, std::span<const int> y, double lambda, const TrainOptions& options,
                  TrainStats* stats) {
    check_training_inputs(x, y);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        fail(ErrorKind::config, "bad_lambda", "lambda must be a finite non-negative number");
    }
    const std::size_t d = x.cols();
    std::vector<double> w(d, 0.0), gw(d), trial(d);
    double b = 0.0;
    double f = probe_objective(x, y, w, b, lambda);
    double step = 1.0;
    TrainStats st;
    for (st.iterations = 0; st.iterations < options.max_iter; ++st.iterations) {
        const double gb = probe_gradient(x, y, w, b, lambda, gw);
        const double g2 = sq_norm(gw) + gb * gb;
        st.grad_norm = std::sqrt(g2);
        if (st.grad_norm < options.grad_tol) {
            st.converged = true;
            break;
        }
        step = std::min(step * 2.0, 1e6);
        bool accepted = false;
        while (step > 1e-30) {
            for (std::size_t j = 0; j < d; ++j) {
                trial[j] = w[j] - step * gw[j];
            }
            const double tb = b - step * gb;
            const double ft = probe_objective(x, y, trial, tb, lambda);
            if (ft <= f - 1e-4 * step * g2) {
                w.swap(trial);
                b = tb;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            break; // no descent possible at machine precision
        }
    }
    if (!std::isfinite(f)) {
        fail(ErrorKind::numeric, "probe_diverged", "probe objective became non-finite");
    }
    st.objective = f;
    if (stats != nullptr) {
        *stats = st;
    }

    Probe probe;
    probe.weights = std::move(w);
    probe.bias = b;
    probe.lambda = lambda;
    const auto scores = probe_confidences(probe, x);
    probe.train_auc = roc_auc(scores, y);
    probe.eval_auc = probe.train_auc;
    return probe;
}

std::vector<double> probe_confidences(const Probe& probe, const MatrixD& x) {
    std::vector<double> z(x.rows());
    kernels::logistic_margins(x, probe.weights, probe.bias, z);
    for (auto& v : z) {
        v = sigmoid(v);
    }
    return z;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    const std::size_t n = scores.size();
    if (labels.size() != n) {
        fail(ErrorKind::data, "shape_mismatch", "score and label counts differ");
    }
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(scores[i])) {
            fail(ErrorKind::numeric, "non_finite", "AUC scores contain NaN");
        }
        n_pos += labels[i] == 1 ? 1 : 0;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        fail(ErrorKind::data, "undefined_auc", "AUC is undefined with a single class");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>(i + 1 + j); // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                pos_rank_sum += midrank;
            }
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

double cohens_d(std::span<const double> positives, std::span<const double> negatives) {
    if (positives.size() < 2 || negatives.size() < 2) {
        fail(ErrorKind::data, "too_few_samples", "Cohen's d needs at least 2 values per group");
    }
    auto moments = [](std::span<const double> v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) {
            ss += (x - mean) * (x - mean);
        }
        return std::pair{mean, ss};
    };
    const auto [m1, ss1] = moments(positives);
    const auto [m0, ss0] = moments(negatives);
    const double pooled = (ss1 + ss0) / static_cast<double>(positives.size() + negatives.size() - 2);
    if (!(pooled > 0.0)) {
        fail(ErrorKind::numeric, "undefined_effect_size", "Cohen's d is undefined: zero pooled variance");
    }
    return (m1 - m0) / std::sqrt(pooled);
}

double centroid_distance(const MatrixD& positives, const MatrixD& negatives) {
    if (positives.rows() == 0 || negatives.rows() == 0) {
        fail(ErrorKind::data, "empty_class", "centroid distance needs non-empty classes");
    }
    if (positives.cols() != negatives.cols()) {
        fail(ErrorKind::data, "shape_mismatch", "class matrices have different widths");
    }
    const std::size_t d = positives.cols();
    auto centroid = [d](const MatrixD& m) {
        std::vector<double> c(d, 0.0);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                c[j] += m(i, j);
            }
        }
        for (auto& v : c) {
            v /= static_cast<double>(m.rows());
        }
        return c;
    };
    const auto a = centroid(positives);
    const auto b = centroid(negatives);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        acc += (a[j] - b[j]) * (a[j] - b[j]);
    }
    return std::sqrt(acc);
}

namespace {

struct LayerOutcome {
    LayerSeparability sep;
    Probe last_probe;
    Probe mean_probe;
};

LayerOutcome analyse_layer(const ActivationDataset& dataset, std::span<const std::size_t> train,
                           std::span<const std::size_t> eval, std::size_t layer, double lambda,
                           const TrainOptions& options) {
    try {
        const auto y_train = gather_labels(dataset, train);
        const auto y_eval = gather_labels(dataset, eval);
        LayerOutcome out;
        out.sep.layer = layer;
        for (Pooling pooling : {Pooling::last_token, Pooling::mean}) {
            const auto xtr = gather_features(dataset, train, layer, pooling);
            const auto xev = gather_features(dataset, eval, layer, pooling);
            Probe probe = train_probe(xtr, y_train, lambda, options);
            probe.layer = layer;
            probe.pooling = pooling;
            const auto conf = probe_confidences(probe, xev);
            probe.eval_auc = roc_auc(conf, y_eval);
            if (pooling == Pooling::last_token) {
                out.sep.last_token_auc = probe.eval_auc;
                MatrixD pos, neg;
                std::vector<double> pos_norms, neg_norms;
                double conf_pos = 0.0, conf_neg = 0.0;
                for (std::size_t i = 0; i < xev.rows(); ++i) {
                    const auto row = xev.row(i);
                    const double norm = std::sqrt(sq_norm(row));
                    if (y_eval[i] == 1) {
                        pos.append_row(row);
                        pos_norms.push_back(norm);
                        conf_pos += conf[i];
                    } else {
                        neg.append_row(row);
                        neg_norms.push_back(norm);
                        conf_neg += conf[i];
                    }
                }
                out.sep.cohens_d = cohens_d(pos_norms, neg_norms);
                out.sep.centroid_distance = centroid_distance(pos, neg);
                out.sep.confidence_gap = conf_pos / static_cast<double>(pos.rows()) -
                                         conf_neg / static_cast<double>(neg.rows());
                out.last_probe = std::move(probe);
            } else {
                out.sep.mean_pool_auc = probe.eval_auc;
                out.mean_probe = std::move(probe);
            }
        }
        out.sep.gain = out.sep.last_token_auc - out.sep.mean_pool_auc;
        return out;
    } catch (const Error& e) {
        throw Error(e.kind(), e.code(), "layer " + std::to_string(layer) + ": " + e.what());
    }
}

LayerSweepResult assemble(std::vector<LayerOutcome> outcomes) {
    LayerSweepResult result;
    for (auto& o : outcomes) {
        result.layers.push_back(o.sep);
        result.last_token_probes.push_back(std::move(o.last_probe));
        result.mean_pool_probes.push_back(std::move(o.mean_probe));
    }
    for (std::size_t l = 1; l < result.layers.size(); ++l) {
        if (result.layers[l].last_token_auc > result.layers[result.best_layer].last_token_auc) {
            result.best_layer = l;
        }
    }
    return result;
}

} // namespace

LayerSweepResult sweep_layers(const ActivationDataset& dataset, const SplitAssignment& splits, double lambda,
                              const TrainOptions& options) {
    const auto train = splits.indices(Split::train);
    const auto eval = splits.indices(Split::eval);
    const auto layers = static_cast<long>(dataset.layer_count);
    std::vector<LayerOutcome> outcomes(dataset.layer_count);
    std::vector<std::exception_ptr> errors(dataset.layer_count);
#pragma omp parallel for schedule(dynamic, 1)
    for (long l = 0; l < layers; ++l) {
        const auto layer = static_cast<std::size_t>(l);
        try {
            outcomes[layer] = analyse_layer(dataset, train, eval, layer, lambda, options);
        } catch (...) {
            errors[layer] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return assemble(std::move(outcomes));
}

LayerSweepResult sweep_layers_serial(const ActivationDataset& dataset, const SplitAssignment& splits,
                                     double lambda, const TrainOptions& options) {
    const auto train = splits.indices(Split::train);
    const auto eval = splits.indices(Split::eval);
    std::vector<LayerOutcome> outcomes;
    for (std::size_t l = 0; l < dataset.layer_count; ++l) {
        outcomes.push_back(analyse_layer(dataset, train, eval, l, lambda, options));
    }
    return assemble(std::move(outcomes));
}

} // namespace aac
