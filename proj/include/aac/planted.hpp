#pragma once

#include <cstdint>
#include <vector>

#include "aac/activation_store.hpp"
#include "aac/toy_model.hpp"

namespace aac {

/// Synthetic labeled corpus for the toy model. Hallucinated (label 1) prompts
/// end with one of a few marker bytes whose embeddings are extreme on one
/// hidden dimension; grounded prompts end with bytes below the median there.
struct PlantedCorpus {
    ActivationDataset dataset;
    std::vector<std::vector<int>> prompts;
    std::size_t planted_dim = 0;
    std::vector<int> marker_tokens;
};

struct PlantedOptions {
    double positive_fraction = 0.5;
    std::size_t min_body = 8;
    std::size_t max_body = 24;
};

PlantedCorpus make_planted_corpus(const ToyTransformer& model, std::uint64_t seed, std::size_t n_samples,
                                  const PlantedOptions& options = {});

} // namespace aac
