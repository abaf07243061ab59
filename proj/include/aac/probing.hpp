#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aac/activation_store.hpp"
#include "aac/matrix.hpp"

namespace aac {

/// Linear hallucination probe: confidence(h) = sigmoid(w.h + bias).
struct Probe {
    std::size_t layer = 0;
    Pooling pooling = Pooling::last_token;
    std::vector<double> weights;
    double bias = 0.0;
    double lambda = 1.0;
    double train_auc = 0.5;
    double eval_auc = 0.5;

    double logit(std::span<const double> h) const;
    double logit(std::span<const float> h) const;
    double confidence(std::span<const double> h) const;
    double confidence(std::span<const float> h) const;
};

double sigmoid(double z);

struct TrainOptions {
    double grad_tol = 1e-6;
    int max_iter = 5000;
};

struct TrainStats {
    int iterations = 0;
    double objective = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
};

// Regularized objective: sum_i BCE(sigmoid(w.x_i + b), y_i) + lambda * |w|^2.
// The bias is not penalized.
double probe_objective(const MatrixD& x, std::span<const int> y, std::span<const double> w, double bias,
                       double lambda);

/// Writes dObjective/dw into grad_w and returns dObjective/dbias.
double probe_gradient(const MatrixD& x, std::span<const int> y, std::span<const double> w, double bias,
                      double lambda, std::span<double> grad_w);

/// Full-batch gradient descent from zero with Armijo backtracking.
Probe train_probe(const MatrixD& x, std::span<const int> y, double lambda, const TrainOptions& options = {},
                  TrainStats* stats = nullptr);

/// Mann-Whitney AUC with midranks (ties count 1/2).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

double cohens_d(std::span<const double> positives, std::span<const double> negatives);
double centroid_distance(const MatrixD& positives, const MatrixD& negatives);

struct LayerSeparability {
    std::size_t layer = 0;
    double last_token_auc = 0.5;
    double mean_pool_auc = 0.5;
    double gain = 0.0; // last_token_auc - mean_pool_auc
    double cohens_d = 0.0;
    double centroid_distance = 0.0;
    double confidence_gap = 0.0; // mean hallucinated - mean grounded confidence (last-token, eval)
};

struct LayerSweepResult {
    std::vector<LayerSeparability> layers;
    std::size_t best_layer = 0;
    std::vector<Probe> last_token_probes; // one per layer
    std::vector<Probe> mean_pool_probes;
};

/// Trains one probe per layer and pooling kind on the train split and scores
/// the eval split. Layers run in parallel; results are independent of thread count.
LayerSweepResult sweep_layers(const ActivationDataset& dataset, const SplitAssignment& splits, double lambda,
                              const TrainOptions& options = {});

/// Single-threaded reference for `sweep_layers`.
LayerSweepResult sweep_layers_serial(const ActivationDataset& dataset, const SplitAssignment& splits,
                                     double lambda, const TrainOptions& options = {});

std::vector<double> probe_confidences(const Probe& probe, const MatrixD& x);

} // namespace aac
