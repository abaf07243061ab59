#include "aac/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aac/kernels.hpp"
#include "aac/rng.hpp"

namespace aac {

namespace {

MatrixF random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
    MatrixF m(rows, cols);
    for (auto& v : m.data()) {
        v = static_cast<float>(rng.normal(0.0, stddev));
    }
    return m;
}

std::vector<float> random_vector(Rng& rng, std::size_t n, double stddev) {
    std::vector<float> v(n);
    for (auto& x : v) {
        x = static_cast<float>(rng.normal(0.0, stddev));
    }
    return v;
}

void layer_norm(std::span<const float> x, std::span<const float> gain, std::span<const float> bias,
                std::span<float> out) {
    const std::size_t d = x.size();
    float mean = 0.0f;
    for (float v : x) {
        mean += v;
    }
    mean /= static_cast<float>(d);
    float var = 0.0f;
    for (float v : x) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<float>(d);
    const float inv = 1.0f / std::sqrt(var + 1e-5f);
    for (std::size_t j = 0; j < d; ++j) {
        out[j] = (x[j] - mean) * inv * gain[j] + bias[j];
    }
}

float gelu(float x) {
    return 0.5f * x * (1.0f + std::tanh(0.7978845608f * (x + 0.044715f * x * x * x)));
}

} // namespace

ToyTransformer::ToyTransformer(const ToyConfig& config) : config_(config) {
    if (config.d_model == 0 || config.n_heads == 0 || config.d_model % config.n_heads != 0) {
        fail(ErrorKind::config, "bad_model_config", "d_model must be a positive multiple of n_heads");
    }
    if (config.vocab_size == 0 || config.max_seq == 0 || config.d_ff == 0) {
        fail(ErrorKind::config, "bad_model_config", "vocab_size, max_seq and d_ff must be positive");
    }
    const std::size_t d = config.d_model;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    Rng rng(derive_seed(config.seed, "toy-transformer-weights"));
    embed_ = random_matrix(rng, config.vocab_size, d, 1.0);
    position_ = random_matrix(rng, config.max_seq, d, 0.2);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        Block b;
        b.ln1_gain.assign(d, 1.0f);
        b.ln1_bias.assign(d, 0.0f);
        b.ln2_gain.assign(d, 1.0f);
        b.ln2_bias.assign(d, 0.0f);
        b.wq = random_matrix(rng, d, d, s);
        b.wk = random_matrix(rng, d, d, s);
        b.wv = random_matrix(rng, d, d, s);
        b.wo = random_matrix(rng, d, d, s);
        b.w_in = random_matrix(rng, config.d_ff, d, s);
        b.b_in = random_vector(rng, config.d_ff, 0.02);
        b.w_out = random_matrix(rng, d, config.d_ff, 1.0 / std::sqrt(static_cast<double>(config.d_ff)));
        b.b_out = random_vector(rng, d, 0.02);
        blocks_.push_back(std::move(b));
    }
    lnf_gain_.assign(d, 1.0f);
    lnf_bias_.assign(d, 0.0f);
    unembed_ = random_matrix(rng, config.vocab_size, d, 2.0 * s);
}

std::span<const float> ToyTransformer::token_embedding(int token) const {
    if (token < 0 || static_cast<std::size_t>(token) >= config_.vocab_size) {
        fail(ErrorKind::data, "invalid_token", "token id " + std::to_string(token) + " out of range");
    }
    return embed_.row(static_cast<std::size_t>(token));
}

std::vector<float> ToyTransformer::logits_from_hidden(std::span<const float> hidden) const {
    if (hidden.size() != config_.d_model) {
        fail(ErrorKind::data, "shape_mismatch", "hidden vector has wrong width");
    }
    std::vector<float> normed(config_.d_model);
    layer_norm(hidden, lnf_gain_, lnf_bias_, normed);
    std::vector<float> logits(config_.vocab_size);
    kernels::matvec(unembed_, normed, logits);
    return logits;
}

Session::Session(const ToyTransformer& model)
    : model_(&model), keys_(model.config().n_layers), values_(model.config().n_layers),
      attention_(model.config().n_layers) {}

StepOutput Session::step(int token, ResidualHook* hook) {
    const auto& cfg = model_->config();
    if (length_ >= cfg.max_seq) {
        fail(ErrorKind::data, "overlong_input",
             "sequence would exceed max_seq=" + std::to_string(cfg.max_seq));
    }
    const auto emb = model_->token_embedding(token);
    const std::size_t d = cfg.d_model;
    const std::size_t heads = cfg.n_heads;
    const std::size_t dh = d / heads;
    const std::size_t pos = length_;

    StepOutput out;
    out.hidden = MatrixF(cfg.n_layers + 1, d);
    std::vector<float> x(d);
    const auto p = model_->position_.row(pos);
    for (std::size_t j = 0; j < d; ++j) {
        x[j] = emb[j] + p[j];
    }
    if (hook != nullptr) {
        hook->on_residual(0, x);
    }
    std::copy(x.begin(), x.end(), out.hidden.row(0).begin());

    std::vector<float> a(d), q(d), k(d), v(d), ctx(d), proj(d), ff(cfg.d_ff), ff_out(d);
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const auto& blk = model_->blocks_[l];
        layer_norm(x, blk.ln1_gain, blk.ln1_bias, a);
        kernels::matvec(blk.wq, a, q);
        kernels::matvec(blk.wk, a, k);
        kernels::matvec(blk.wv, a, v);
        keys_[l].insert(keys_[l].end(), k.begin(), k.end());
        values_[l].insert(values_[l].end(), v.begin(), v.end());

        // Causal by construction: the cache holds positions 0..pos only.
        const std::size_t span_len = pos + 1;
        attention_[l].assign(heads, std::vector<float>(span_len));
        for (std::size_t h = 0; h < heads; ++h) {
            auto& probs = attention_[l][h];
            float max_score = -std::numeric_limits<float>::infinity();
            for (std::size_t t = 0; t < span_len; ++t) {
                float s = 0.0f;
                for (std::size_t c = 0; c < dh; ++c) {
                    s += q[h * dh + c] * keys_[l][t * d + h * dh + c];
                }
                probs[t] = s * scale;
                max_score = std::max(max_score, probs[t]);
            }
            float total = 0.0f;
            for (auto& pr : probs) {
                pr = std::exp(pr - max_score);
                total += pr;
            }
            for (auto& pr : probs) {
                pr /= total;
            }
            for (std::size_t c = 0; c < dh; ++c) {
                float acc = 0.0f;
                for (std::size_t t = 0; t < span_len; ++t) {
                    acc += probs[t] * values_[l][t * d + h * dh + c];
                }
                ctx[h * dh + c] = acc;
            }
        }
        kernels::matvec(blk.wo, ctx, proj);
        for (std::size_t j = 0; j < d; ++j) {
            x[j] += proj[j];
        }

        layer_norm(x, blk.ln2_gain, blk.ln2_bias, a);
        kernels::matvec(blk.w_in, a, ff);
        for (std::size_t f = 0; f < ff.size(); ++f) {
            ff[f] = gelu(ff[f] + blk.b_in[f]);
        }
        kernels::matvec(blk.w_out, ff, ff_out);
        for (std::size_t j = 0; j < d; ++j) {
            x[j] += ff_out[j] + blk.b_out[j];
        }
        if (hook != nullptr) {
            hook->on_residual(l + 1, x);
        }
        std::copy(x.begin(), x.end(), out.hidden.row(l + 1).begin());
    }
    out.logits = model_->logits_from_hidden(x);
    ++length_;
    return out;
}

ForwardResult forward(const ToyTransformer& model, std::span<const int> tokens) {
    const auto& cfg = model.config();
    if (tokens.size() > cfg.max_seq) {
        fail(ErrorKind::data, "overlong_input",
             "input of " + std::to_string(tokens.size()) + " tokens exceeds max_seq=" + std::to_string(cfg.max_seq));
    }
    for (int t : tokens) {
        model.token_embedding(t); // validates the id up front
    }
    ForwardResult result;
    result.logits = MatrixF(tokens.size(), cfg.vocab_size);
    result.hidden.assign(cfg.n_layers + 1, MatrixF(tokens.size(), cfg.d_model));
    Session session(model);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto step = session.step(tokens[t]);
        std::copy(step.logits.begin(), step.logits.end(), result.logits.row(t).begin());
        for (std::size_t l = 0; l <= cfg.n_layers; ++l) {
            const auto row = step.hidden.row(l);
            std::copy(row.begin(), row.end(), result.hidden[l].row(t).begin());
        }
    }
    return result;
}

int argmax(std::span<const float> logits) {
    if (logits.empty()) {
        fail(ErrorKind::data, "empty_logits", "argmax of empty logits");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) {
            best = i;
        }
    }
    return static_cast<int>(best);
}

double log_prob(std::span<const float> logits, int token) {
    if (token < 0 || static_cast<std::size_t>(token) >= logits.size()) {
        fail(ErrorKind::data, "invalid_token", "token id out of range for logits");
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (float v : logits) {
        max_logit = std::max(max_logit, static_cast<double>(v));
    }
    double total = 0.0;
    for (float v : logits) {
        total += std::exp(static_cast<double>(v) - max_logit);
    }
    return static_cast<double>(logits[static_cast<std::size_t>(token)]) - max_logit - std::log(total);
}

} // namespace aac
