#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aac/matrix.hpp"

namespace aac {

enum class Pooling { last_token, mean };

const char* to_string(Pooling pooling);

/// One prompt's pooled hidden states. Both blocks are (layer_count x hidden_dim),
/// row-major, one row per layer.
struct ActivationRecord {
    std::string prompt_id;
    int label = 0; // 0 grounded, 1 hallucinated
    std::vector<float> last_token;
    std::vector<float> mean_pool;
    std::string prompt_excerpt;
};

struct ActivationDataset {
    std::string model_id;
    std::size_t layer_count = 0;
    std::size_t hidden_dim = 0;
    std::vector<ActivationRecord> samples;
    std::uint64_t split_seed = 0;

    std::span<const float> vector(std::size_t sample, std::size_t layer, Pooling pooling) const;
    std::vector<int> labels() const;

    /// Throws aac::Error (data) on any broken invariant.
    void validate() const;
};

// Pooling over a (T x d) hidden-state sequence. `attention_mask[t]` is 1 for a
// real token and 0 for padding.
std::vector<float> pool_last_token(const MatrixF& hidden, std::span<const std::uint8_t> attention_mask);
std::vector<float> pool_mean(const MatrixF& hidden, std::span<const std::uint8_t> attention_mask);

enum class Split : std::uint8_t { train, cancel, eval };

const char* to_string(Split split);

struct SplitAssignment {
    std::vector<Split> of_sample;

    std::vector<std::size_t> indices(Split split) const;
    std::size_t count(Split split) const;
};

/// Stratified, seed-keyed 50/25/25 partition. Samples are ordered within each
/// class by hash(seed, id), the classes are interleaved by fractional rank and
/// the merged order is cut at floor(n/2) and floor(n/2)+floor(n/4).
SplitAssignment assign_splits(std::span<const int> labels, std::span<const std::string> ids, std::uint64_t seed);
SplitAssignment assign_splits(const ActivationDataset& dataset);

/// Gather the (rows x hidden_dim) feature matrix for the given samples.
MatrixD gather_features(const ActivationDataset& dataset, std::span<const std::size_t> samples,
                        std::size_t layer, Pooling pooling);
std::vector<int> gather_labels(const ActivationDataset& dataset, std::span<const std::size_t> samples);

// AACT container: "AACT" | u32 version | u64 metadata length | metadata JSON |
// float32 LE payload, per sample, per layer: last-token row then mean-pool row.
inline constexpr std::uint32_t kContainerVersion = 1;

void write_container(const ActivationDataset& dataset, const std::filesystem::path& path);
ActivationDataset read_container(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_container(const ActivationDataset& dataset);
ActivationDataset decode_container(std::span<const std::uint8_t> bytes);

} // namespace aac
