#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aac/activation_store.hpp"
#include "aac/matrix.hpp"
#include "aac/probing.hpp"

namespace aac {

struct HNodeSelection {
    std::vector<std::size_t> h_nodes;    // k largest weights, descending
    std::vector<std::size_t> anti_nodes; // k most negative weights, ascending
};

/// Signed top-k selection; equal weights resolve to the lower index.
HNodeSelection select_hnodes(std::span<const double> weights, std::size_t k);

/// Percentile with linear interpolation at index (m-1)*p/100.
double percentile(std::vector<double> values, double p);

/// Column-wise `percentile` of a (m x K) matrix.
std::vector<double> percentile_baseline(const MatrixD& grounded, double p);

struct HNodeConfig {
    std::size_t layer = 0;
    std::vector<std::size_t> h_nodes;
    std::vector<std::size_t> anti_nodes;
    std::vector<double> baseline;      // per h_node
    std::vector<double> anti_baseline; // per anti_node
    std::vector<double> grounded_mean; // per h_node, used by the mean strategy
    double percentile = 80.0;
    std::size_t k = 50;
    double alpha = 0.9;
    double theta = 0.45;

    /// Throws aac::Error (config) when fields disagree or are out of range.
    void validate(std::size_t hidden_dim) const;
};

struct HNodeParams {
    std::size_t k = 50;
    double percentile = 80.0;
    double alpha = 0.9;
    double theta = 0.45;
};

/// Selects H-Nodes from the probe and fits baselines on grounded samples of
/// the cancel split at the probe's layer (last-token vectors).
HNodeConfig build_hnode_config(const Probe& probe, const ActivationDataset& dataset, const SplitAssignment& splits,
                               const HNodeParams& params);

/// Recompute baselines for a different percentile, keeping the node sets.
HNodeConfig with_percentile(const HNodeConfig& config, const MatrixD& grounded_full, double p);

/// Grounded cancel-split vectors (all hidden dims) at the config's layer.
MatrixD grounded_cancel_features(const ActivationDataset& dataset, const SplitAssignment& splits, std::size_t layer);

struct NeuronProfile {
    std::size_t rank = 0;
    std::size_t neuron = 0;
    double weight = 0.0;
    double hallucinated_mean = 0.0;
    double grounded_mean = 0.0;
    double gap = 0.0; // hallucinated_mean - grounded_mean
    double max_activation = 0.0;
    std::string max_prompt_id;
    std::string max_excerpt;
};

/// Profiles the first `top_m` H-Nodes on the eval split.
std::vector<NeuronProfile> profile_hnodes(const HNodeConfig& config, const Probe& probe,
                                          const ActivationDataset& dataset, const SplitAssignment& splits,
                                          std::size_t top_m);

} // namespace aac
