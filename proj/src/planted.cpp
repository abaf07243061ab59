#include "aac/planted.hpp"

#include <algorithm>
#include <cmath>

#include "aac/hook.hpp"
#include "aac/rng.hpp"

namespace aac {

namespace {

constexpr int kFirstPrintable = 33;
constexpr int kLastPrintable = 126;
constexpr std::size_t kMarkerCount = 3;

} // namespace

PlantedCorpus make_planted_corpus(const ToyTransformer& model, std::uint64_t seed, std::size_t n_samples,
                                  const PlantedOptions& options) {
    if (n_samples < 16) {
        fail(ErrorKind::config, "too_few_samples", "planted corpus needs at least 16 samples");
    }
    if (!(options.positive_fraction >= 0.0 && options.positive_fraction <= 1.0)) {
        fail(ErrorKind::config, "bad_fraction", "positive_fraction must lie in [0, 1]");
    }
    if (options.min_body == 0 || options.max_body < options.min_body ||
        options.max_body + 1 > model.config().max_seq) {
        fail(ErrorKind::config, "bad_body_length", "invalid prompt body length range");
    }
    const auto& cfg = model.config();
    PlantedCorpus corpus;

    // Marker tokens: the printable bytes most extreme on the dimension whose
    // third-largest printable embedding value is highest.
    double best_score = -1e300;
    for (std::size_t j = 0; j < cfg.d_model; ++j) {
        std::vector<std::pair<float, int>> col;
        for (int t = kFirstPrintable; t <= kLastPrintable; ++t) {
            col.emplace_back(model.token_embedding(t)[j], t);
        }
        std::sort(col.begin(), col.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        if (col[kMarkerCount - 1].first > best_score) {
            best_score = col[kMarkerCount - 1].first;
            corpus.planted_dim = j;
            corpus.marker_tokens.clear();
            for (std::size_t m = 0; m < kMarkerCount; ++m) {
                corpus.marker_tokens.push_back(col[m].second);
            }
        }
    }
    auto is_marker = [&](int t) {
        return std::find(corpus.marker_tokens.begin(), corpus.marker_tokens.end(), t) != corpus.marker_tokens.end();
    };

    std::vector<float> column;
    for (int t = kFirstPrintable; t <= kLastPrintable; ++t) {
        column.push_back(model.token_embedding(t)[corpus.planted_dim]);
    }
    std::nth_element(column.begin(), column.begin() + static_cast<long>(column.size() / 2), column.end());
    const float median = column[column.size() / 2];
    std::vector<int> grounded_endings;
    for (int t = kFirstPrintable; t <= kLastPrintable; ++t) {
        if (!is_marker(t) && model.token_embedding(t)[corpus.planted_dim] < median) {
            grounded_endings.push_back(t);
        }
    }
    std::vector<int> body_alphabet;
    for (int t = 'a'; t <= 'z'; ++t) {
        if (!is_marker(t)) {
            body_alphabet.push_back(t);
        }
    }
    body_alphabet.push_back(' ');

    Rng rng(derive_seed(seed, "planted-corpus"));
    const auto n_pos = static_cast<std::size_t>(std::llround(options.positive_fraction * static_cast<double>(n_samples)));
    auto& ds = corpus.dataset;
    ds.model_id = "toy-transformer/seed=" + std::to_string(cfg.seed) + "/d=" + std::to_string(cfg.d_model) +
                  "/layers=" + std::to_string(cfg.n_layers);
    ds.layer_count = cfg.n_layers + 1;
    ds.hidden_dim = cfg.d_model;
    ds.split_seed = seed;
    const std::vector<std::uint8_t> mask(options.max_body + 1, 1);
    for (std::size_t i = 0; i < n_samples; ++i) {
        // Alternate classes while both remain so any prefix stays balanced.
        const int label = i < 2 * std::min(n_pos, n_samples - n_pos) ? static_cast<int>(i % 2)
                                                                     : (n_pos > n_samples - n_pos ? 1 : 0);
        const std::size_t body =
            options.min_body + static_cast<std::size_t>(rng.below(options.max_body - options.min_body + 1));
        std::vector<int> prompt;
        for (std::size_t t = 0; t < body; ++t) {
            prompt.push_back(body_alphabet[rng.below(body_alphabet.size())]);
        }
        if (label == 1) {
            prompt.push_back(corpus.marker_tokens[rng.below(corpus.marker_tokens.size())]);
        } else {
            prompt.push_back(grounded_endings[rng.below(grounded_endings.size())]);
        }

        const auto fwd = forward(model, prompt);
        ActivationRecord rec;
        rec.prompt_id = "planted-" + std::to_string(i);
        rec.label = label;
        rec.prompt_excerpt = to_text(prompt);
        const std::span<const std::uint8_t> m(mask.data(), prompt.size());
        for (std::size_t l = 0; l < ds.layer_count; ++l) {
            const auto last = pool_last_token(fwd.hidden[l], m);
            const auto mean = pool_mean(fwd.hidden[l], m);
            rec.last_token.insert(rec.last_token.end(), last.begin(), last.end());
            rec.mean_pool.insert(rec.mean_pool.end(), mean.begin(), mean.end());
        }
        ds.samples.push_back(std::move(rec));
        corpus.prompts.push_back(std::move(prompt));
    }
    return corpus;
}

} // namespace aac
