#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aac/activation_store.hpp"
#include "aac/cancellation.hpp"
#include "aac/hook.hpp"
#include "aac/serialize.hpp"
#include "aac/toy_model.hpp"

namespace aac {

struct PipelineConfig {
    std::size_t k = 50;
    double alpha = 0.9;
    double theta = 0.45;
    double percentile = 80.0;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    std::size_t max_new_tokens = 30;
    std::size_t n_samples = 600;
    std::size_t gen_prompts = 100;
    std::size_t mc_items = 60;
    std::size_t text_count = 20;
    std::size_t text_length = 64;
    std::string activations; // empty -> planted corpus from the toy model
    std::string probe;
    std::string hnodes;
    std::string out_dir = "aac_out";

    /// Throws aac::Error (config) on any out-of-range field.
    void validate() const;
};

/// Overlays keys from a JSON object; unknown keys and wrong types are config errors.
void apply_config_json(PipelineConfig& config, const Json& overrides);
PipelineConfig load_config(const std::filesystem::path& path);
Json config_to_json(const PipelineConfig& config);

ToyConfig toy_config_for(std::uint64_t seed);
std::string model_config_label(const ActivationDataset& dataset);

/// Everything the activation-space stages need, loaded once.
struct Workspace {
    ActivationDataset dataset;
    SplitAssignment splits;
    std::string model_config;
};

Workspace make_workspace(ActivationDataset dataset);

/// One probe on the train split at (layer, pooling), scored on the eval split.
Probe train_layer_probe(const Workspace& ws, std::size_t layer, Pooling pooling, double lambda);

/// Number of H-Nodes actually used: min(k, floor(d / 2)).
std::size_t effective_k(std::size_t k, std::size_t hidden_dim);

HNodeConfig fit_hnodes(const Workspace& ws, const Probe& probe, const PipelineConfig& config);

struct CancelStage {
    std::vector<CancellationReport> reports; // post-hoc strategies, hook, then best ITI
    ItiSweep iti;
};

/// All strategies at the config's layer, plus the ITI alpha sweep.
CancelStage run_cancel_stage(const Workspace& ws, const Probe& probe, const HNodeConfig& config);

/// ITI direction from the train split at `layer` (last-token vectors).
std::vector<double> train_iti_direction(const Workspace& ws, std::size_t layer);

HookSpec make_hook_spec(const Workspace& ws, const Probe& probe, const HNodeConfig& config, HookMode mode,
                        double iti_alpha = 10.0);

/// Prompt token sequences recovered from the stored excerpts, first `count` samples.
std::vector<std::vector<int>> dataset_prompts(const ActivationDataset& dataset, std::size_t count);

// Report suites ("gen", "downstream", "capability").
Json gen_report(const ToyTransformer& model, const Workspace& ws, const Probe& probe, const HNodeConfig& config,
                const PipelineConfig& pc);
Json downstream_report(const Workspace& ws, const Probe& probe, const HNodeConfig& config, const PipelineConfig& pc);
Json capability_report(const ToyTransformer& model, const Workspace& ws, const Probe& probe,
                       const HNodeConfig& config, const PipelineConfig& pc);

/// True when the dataset came from the toy model built by `toy_config_for(seed)`.
bool toy_model_matches(const ActivationDataset& dataset, std::uint64_t seed);

struct PlotTables {
    std::string layer_sweep;
    std::string selectivity;
    std::string percentile_sweep;
    std::string ablation;
};

/// Tidy CSV tables from any mix of layer_sweep, cancellation,
/// percentile_sweep and ablation documents. Other kinds are ignored.
/// Missing fields -> aac::Error (schema).
PlotTables emit_plot_data(const std::vector<Json>& reports);
void write_plot_data(const PlotTables& tables, const std::filesystem::path& dir);

/// extract -> sweep-layers -> hnodes -> cancel -> sweep-pct -> ablate ->
/// generate -> report -> plot-data, all written under config.out_dir.
/// Returns the list of files written.
std::vector<std::filesystem::path> run_pipeline(const PipelineConfig& config);

} // namespace aac
