#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aac/matrix.hpp"

namespace aac {

struct ToyConfig {
    std::size_t vocab_size = 256; // byte-level
    std::size_t d_model = 64;
    std::size_t n_layers = 4;
    std::size_t n_heads = 4;
    std::size_t max_seq = 128;
    std::size_t d_ff = 256;
    std::uint64_t seed = 0;
};

/// Deterministic pre-norm decoder-only transformer with seeded random weights.
/// Immutable after construction; share freely across threads.
class ToyTransformer {
public:
    explicit ToyTransformer(const ToyConfig& config);

    const ToyConfig& config() const noexcept { return config_; }
    std::span<const float> token_embedding(int token) const;

    /// Final normalization followed by the unembedding (logit lens at any layer).
    std::vector<float> logits_from_hidden(std::span<const float> hidden) const;

private:
    friend class Session;

    struct Block {
        std::vector<float> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
        MatrixF wq, wk, wv, wo; // d x d
        MatrixF w_in;           // d_ff x d
        std::vector<float> b_in;
        MatrixF w_out; // d x d_ff
        std::vector<float> b_out;
    };

    ToyConfig config_;
    MatrixF embed_;    // vocab x d
    MatrixF position_; // max_seq x d
    std::vector<Block> blocks_;
    std::vector<float> lnf_gain_, lnf_bias_;
    MatrixF unembed_; // vocab x d
};

/// Sees (and may edit in place) the residual stream of the position being
/// processed, after each layer boundary 0..n_layers.
class ResidualHook {
public:
    virtual ~ResidualHook() = default;
    virtual void on_residual(std::size_t layer, std::span<float> hidden) = 0;
};

struct StepOutput {
    std::vector<float> logits;
    MatrixF hidden; // (n_layers + 1) x d_model for the new position
};

/// One autoregressive decoding context: owns the key/value cache.
/// Single-threaded; run independent sessions concurrently if needed.
class Session {
public:
    explicit Session(const ToyTransformer& model);

    /// Appends `token` at the next position and runs every layer on it.
    StepOutput step(int token, ResidualHook* hook = nullptr);

    std::size_t length() const noexcept { return length_; }

    /// Attention probabilities of the latest step, [layer][head][position].
    const std::vector<std::vector<std::vector<float>>>& last_attention() const noexcept { return attention_; }

private:
    const ToyTransformer* model_;
    std::size_t length_ = 0;
    std::vector<std::vector<float>> keys_;   // per layer, length x d
    std::vector<std::vector<float>> values_; // per layer, length x d
    std::vector<std::vector<std::vector<float>>> attention_;
};

struct ForwardResult {
    MatrixF logits;              // T x vocab
    std::vector<MatrixF> hidden; // (n_layers + 1) entries of T x d_model
};

/// Hook-free full-sequence forward pass.
ForwardResult forward(const ToyTransformer& model, std::span<const int> tokens);

/// Greedy choice; ties resolve to the lowest token id.
int argmax(std::span<const float> logits);

/// log-softmax of `logits` at `token`, computed in double.
double log_prob(std::span<const float> logits, int token);

} // namespace aac
