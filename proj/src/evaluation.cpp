#include "aac/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>

#include "aac/rng.hpp"

namespace aac {

void McItem::validate() const {
    if (question.empty() || candidates.empty() || candidates.size() != truth.size()) {
        fail(ErrorKind::data, "bad_mc_item", "MC item needs a question and one truth flag per candidate");
    }
    bool any_true = false, any_false = false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (candidates[c].empty()) {
            fail(ErrorKind::data, "bad_mc_item", "MC candidates must be non-empty");
        }
        (truth[c] != 0 ? any_true : any_false) = true;
    }
    if (!any_true) {
        fail(ErrorKind::data, "bad_mc_item", "MC item needs at least one true candidate");
    }
    // All-true items are accepted (MC2 is then 1); all-false items are not scoreable.
    (void)any_false;
}

namespace {

double mean(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x;
    }
    return acc / static_cast<double>(v.size());
}

void check_scores(std::span<const std::vector<double>> scores, std::span<const McItem> items) {
    if (items.empty()) {
        fail(ErrorKind::data, "empty_items", "MC metrics need at least one item");
    }
    if (scores.size() != items.size()) {
        fail(ErrorKind::data, "shape_mismatch", "one score vector per item expected");
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (scores[i].size() != items[i].truth.size()) {
            fail(ErrorKind::data, "shape_mismatch", "one score per candidate expected");
        }
    }
}

} // namespace

std::vector<std::vector<double>> score_mc_items(const ToyTransformer& model, std::span<const McItem> items,
                                                const HookSpec* hook) {
    if (items.empty()) {
        fail(ErrorKind::data, "empty_items", "MC metrics need at least one item");
    }
    for (const auto& item : items) {
        item.validate();
    }
    std::vector<std::vector<double>> scores(items.size());
    std::vector<std::exception_ptr> errors(items.size());
    const auto n = static_cast<long>(items.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) {
        const auto& item = items[static_cast<std::size_t>(i)];
        try {
            for (const auto& cand : item.candidates) {
                const auto lps = continuation_log_probs(model, item.question, cand, hook);
                scores[static_cast<std::size_t>(i)].push_back(mean(lps));
            }
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return scores;
}

double mc1_from_scores(std::span<const std::vector<double>> scores, std::span<const McItem> items) {
    check_scores(scores, items);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& s = scores[i];
        std::size_t best = 0;
        for (std::size_t c = 1; c < s.size(); ++c) {
            if (s[c] > s[best]) {
                best = c;
            }
        }
        correct += items[i].truth[best] != 0 ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

std::vector<double> mc2_per_item(std::span<const std::vector<double>> scores, std::span<const McItem> items) {
    check_scores(scores, items);
    std::vector<double> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& s = scores[i];
        const double top = *std::max_element(s.begin(), s.end());
        double total = 0.0, on_true = 0.0;
        for (std::size_t c = 0; c < s.size(); ++c) {
            const double w = std::exp(s[c] - top);
            total += w;
            on_true += items[i].truth[c] != 0 ? w : 0.0;
        }
        out.push_back(on_true / total);
    }
    return out;
}

double mc2_from_scores(std::span<const std::vector<double>> scores, std::span<const McItem> items) {
    return mean(mc2_per_item(scores, items));
}

double mc1(const ToyTransformer& model, std::span<const McItem> items, const HookSpec* hook) {
    return mc1_from_scores(score_mc_items(model, items, hook), items);
}

double mc2(const ToyTransformer& model, std::span<const McItem> items, const HookSpec* hook) {
    return mc2_from_scores(score_mc_items(model, items, hook), items);
}

double token_f1(std::span<const int> generated, std::span<const int> reference) {
    if (generated.empty() && reference.empty()) {
        return 1.0;
    }
    if (generated.empty() || reference.empty()) {
        return 0.0;
    }
    std::map<int, std::size_t> ref_counts;
    for (int t : reference) {
        ++ref_counts[t];
    }
    std::size_t overlap = 0;
    for (int t : generated) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) {
        return 0.0;
    }
    const double precision = static_cast<double>(overlap) / static_cast<double>(generated.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(reference.size());
    return 2.0 * precision * recall / (precision + recall);
}

bool exact_match(std::span<const int> generated, std::span<const int> reference) {
    return std::equal(generated.begin(), generated.end(), reference.begin(), reference.end());
}

double perplexity_from_log_probs(std::span<const double> log_probs) {
    if (log_probs.empty()) {
        fail(ErrorKind::data, "too_short", "perplexity needs at least one predicted token");
    }
    return std::exp(-mean(log_probs));
}

double perplexity(const ToyTransformer& model, std::span<const int> tokens, const HookSpec* hook) {
    if (tokens.size() < 2) {
        fail(ErrorKind::data, "too_short", "perplexity needs at least 2 tokens");
    }
    const auto lps = continuation_log_probs(model, tokens.first(1), tokens.subspan(1), hook);
    return perplexity_from_log_probs(lps);
}

std::size_t dola_early_layer(std::size_t n_layers) {
    return static_cast<std::size_t>(std::llround(0.38 * static_cast<double>(n_layers)));
}

double dola_score(const ToyTransformer& model, std::span<const int> context, std::span<const int> candidate,
                  std::size_t early_layer, std::size_t late_layer, double contrast) {
    const std::size_t depth = model.config().n_layers;
    if (early_layer > late_layer || late_layer > depth) {
        fail(ErrorKind::config, "bad_layers",
             "need early_layer <= late_layer <= " + std::to_string(depth) + ", got " + std::to_string(early_layer) +
                 " and " + std::to_string(late_layer));
    }
    if (candidate.empty()) {
        fail(ErrorKind::data, "bad_mc_item", "DoLA candidate must be non-empty");
    }
    std::vector<MatrixF> hidden;
    continuation_log_probs(model, context, candidate, nullptr, &hidden);
    double total = 0.0;
    for (std::size_t t = 0; t < candidate.size(); ++t) {
        const double late = log_prob(model.logits_from_hidden(hidden[t].row(late_layer)), candidate[t]);
        const double early = log_prob(model.logits_from_hidden(hidden[t].row(early_layer)), candidate[t]);
        total += late - contrast * early;
    }
    return total / static_cast<double>(candidate.size());
}

double dola_mc1(const ToyTransformer& model, std::span<const McItem> items, std::size_t early_layer,
                std::size_t late_layer, double contrast) {
    std::vector<std::vector<double>> scores;
    for (const auto& item : items) {
        item.validate();
        std::vector<double> s;
        for (const auto& cand : item.candidates) {
            s.push_back(dola_score(model, item.question, cand, early_layer, late_layer, contrast));
        }
        scores.push_back(std::move(s));
    }
    return mc1_from_scores(scores, items);
}

DownstreamMetrics downstream_from_confidences(std::span<const double> confidences, std::span<const int> labels) {
    if (confidences.size() != labels.size() || labels.empty()) {
        fail(ErrorKind::data, "shape_mismatch", "confidence and label counts differ or are empty");
    }
    std::size_t correct = 0, n_pos = 0, flagged_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int predicted = confidences[i] > 0.5 ? 1 : 0;
        correct += predicted == labels[i] ? 1 : 0;
        if (labels[i] == 1) {
            ++n_pos;
            flagged_pos += predicted;
        }
    }
    DownstreamMetrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    m.hall_rate = n_pos > 0 ? static_cast<double>(flagged_pos) / static_cast<double>(n_pos) : 0.0;
    m.roc_auc = roc_auc(confidences, labels);
    return m;
}

DownstreamMetrics downstream_accuracy(const EvalSet& eval, Strategy strategy, const StrategyContext& ctx) {
    if (ctx.probe == nullptr) {
        fail(ErrorKind::config, "missing_probe", "downstream accuracy needs a probe");
    }
    const auto edited = apply_strategy(strategy, eval.x, ctx);
    return downstream_from_confidences(probe_confidences(*ctx.probe, edited), eval.labels);
}

DownstreamMetrics downstream_baseline(const EvalSet& eval, const Probe& probe) {
    return downstream_from_confidences(probe_confidences(probe, eval.x), eval.labels);
}

namespace {

std::vector<int> random_word(Rng& rng) {
    const std::size_t len = 2 + rng.below(5);
    std::vector<int> w;
    for (std::size_t i = 0; i < len; ++i) {
        w.push_back('a' + static_cast<int>(rng.below(26)));
    }
    return w;
}

std::vector<int> random_sentence(Rng& rng, std::size_t min_len) {
    std::vector<int> out;
    while (out.size() < min_len) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        const auto w = random_word(rng);
        out.insert(out.end(), w.begin(), w.end());
    }
    return out;
}

} // namespace

std::vector<McItem> make_synthetic_mc_items(std::uint64_t seed, std::size_t count, std::size_t n_candidates) {
    if (n_candidates < 2) {
        fail(ErrorKind::config, "bad_candidates", "MC items need at least 2 candidates");
    }
    Rng rng(derive_seed(seed, "synthetic-mc"));
    std::vector<McItem> items;
    for (std::size_t i = 0; i < count; ++i) {
        McItem item;
        item.question = random_sentence(rng, 24);
        const std::size_t len = 4 + rng.below(5);
        const std::size_t start = rng.below(item.question.size() - len + 1);
        const std::size_t true_slot = rng.below(n_candidates);
        for (std::size_t c = 0; c < n_candidates; ++c) {
            std::vector<int> cand;
            if (c == true_slot) {
                cand.assign(item.question.begin() + static_cast<long>(start),
                            item.question.begin() + static_cast<long>(start + len));
            } else {
                for (std::size_t t = 0; t < len; ++t) {
                    cand.push_back(33 + static_cast<int>(rng.below(94)));
                }
            }
            item.candidates.push_back(std::move(cand));
            item.truth.push_back(c == true_slot ? 1 : 0);
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<std::vector<int>> make_synthetic_text(std::uint64_t seed, std::size_t count, std::size_t length) {
    Rng rng(derive_seed(seed, "synthetic-text"));
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < count; ++i) {
        auto s = random_sentence(rng, length);
        s.resize(length);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace aac
