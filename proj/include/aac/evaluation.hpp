#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aac/cancellation.hpp"
#include "aac/hook.hpp"
#include "aac/toy_model.hpp"

namespace aac {

struct McItem {
    std::vector<int> question;
    std::vector<std::vector<int>> candidates;
    std::vector<int> truth; // 1 = true answer

    void validate() const;
};

/// Length-normalized (mean per-token) log-probability of each candidate.
std::vector<std::vector<double>> score_mc_items(const ToyTransformer& model, std::span<const McItem> items,
                                                const HookSpec* hook);

/// Fraction of items whose top-scoring candidate is true; ties -> lowest index.
double mc1_from_scores(std::span<const std::vector<double>> scores, std::span<const McItem> items);
/// Mean softmax mass on true candidates.
double mc2_from_scores(std::span<const std::vector<double>> scores, std::span<const McItem> items);
std::vector<double> mc2_per_item(std::span<const std::vector<double>> scores, std::span<const McItem> items);

double mc1(const ToyTransformer& model, std::span<const McItem> items, const HookSpec* hook);
double mc2(const ToyTransformer& model, std::span<const McItem> items, const HookSpec* hook);

/// Multiset token-overlap F1. Both empty -> 1, exactly one empty -> 0.
double token_f1(std::span<const int> generated, std::span<const int> reference);
bool exact_match(std::span<const int> generated, std::span<const int> reference);

/// exp(mean next-token NLL) over the whole sequence.
double perplexity(const ToyTransformer& model, std::span<const int> tokens, const HookSpec* hook);
double perplexity_from_log_probs(std::span<const double> log_probs);

/// Early-exit layer for contrastive decoding: round(0.38 * n_layers).
std::size_t dola_early_layer(std::size_t n_layers);

/// Mean over candidate tokens of log p_late - contrast * log p_early, both read
/// through the final norm + unembedding at the named layers.
double dola_score(const ToyTransformer& model, std::span<const int> context, std::span<const int> candidate,
                  std::size_t early_layer, std::size_t late_layer, double contrast = 0.5);

double dola_mc1(const ToyTransformer& model, std::span<const McItem> items, std::size_t early_layer,
                std::size_t late_layer, double contrast = 0.5);

struct DownstreamMetrics {
    double accuracy = 0.0;
    double hall_rate = 0.0; // share of label-1 samples with confidence > 0.5
    double roc_auc = 0.5;
};

DownstreamMetrics downstream_from_confidences(std::span<const double> confidences, std::span<const int> labels);

/// Applies `strategy` to the eval vectors and scores them with the probe.
DownstreamMetrics downstream_accuracy(const EvalSet& eval, Strategy strategy, const StrategyContext& ctx);
/// Unmodified vectors.
DownstreamMetrics downstream_baseline(const EvalSet& eval, const Probe& probe);

// Synthetic stand-ins for benchmark suites.

/// Question of random words; the true answer repeats a span of the question,
/// false answers are random printable bytes of the same length.
std::vector<McItem> make_synthetic_mc_items(std::uint64_t seed, std::size_t count, std::size_t n_candidates);

/// Word-like lowercase text for perplexity checks.
std::vector<std::vector<int>> make_synthetic_text(std::uint64_t seed, std::size_t count, std::size_t length);

} // namespace aac
