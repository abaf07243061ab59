#include <cmath>

#include "aac/hook.hpp"
#include "aac/pipeline.hpp"
#include "aac/planted.hpp"
#include "aac/toy_model.hpp"
#include "test_util.hpp"

using namespace aac;
using aac::test::expect_error;

namespace {

std::vector<int> random_tokens(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<int> t(n);
    for (auto& v : t) {
        v = static_cast<int>(rng.below(256));
    }
    return t;
}

// Planted corpus, probe and H-Nodes at the best layer, built once.
struct PlantedSetup {
    ToyTransformer model{toy_config_for(3)};
    Workspace ws;
    Probe probe;
    HNodeConfig config;

    PlantedSetup() {
        ws = make_workspace(make_planted_corpus(model, 3, 240).dataset);
        probe = train_layer_probe(ws, 0, Pooling::last_token, 1.0);
        PipelineConfig pc;
        config = fit_hnodes(ws, probe, pc);
    }
};

const PlantedSetup& planted() {
    static const PlantedSetup setup;
    return setup;
}

} // namespace

TEST(ToyModel, SingleTokenShapes) {
    const ToyTransformer model(ToyConfig{});
    const std::vector<int> tok = {65};
    const auto r = forward(model, tok);
    ASSERT_EQ(r.hidden.size(), 5u);
    for (const auto& h : r.hidden) {
        EXPECT_EQ(h.rows(), 1u);
        EXPECT_EQ(h.cols(), 64u);
    }
    EXPECT_EQ(r.logits.rows(), 1u);
    EXPECT_EQ(r.logits.cols(), 256u);
}

TEST(ToyModel, PrefixProperty) {
    const ToyTransformer model(ToyConfig{.seed = 1});
    const auto tokens = random_tokens(1, 20);
    const auto full = forward(model, tokens);
    const auto part = forward(model, std::span(tokens).first(8));
    for (std::size_t t = 0; t < 8; ++t) {
        for (std::size_t v = 0; v < 256; ++v) {
            ASSERT_EQ(part.logits(t, v), full.logits(t, v));
        }
    }
}

TEST(ToyModel, AttentionRowsSumToOne) {
    const ToyTransformer model(ToyConfig{.seed = 2});
    Session s(model);
    for (int tok : random_tokens(2, 30)) {
        s.step(tok);
        for (const auto& layer : s.last_attention()) {
            for (const auto& head : layer) {
                double sum = 0.0;
                for (float p : head) {
                    EXPECT_GE(p, 0.0f);
                    sum += p;
                }
                EXPECT_NEAR(sum, 1.0, 1e-6);
                EXPECT_EQ(head.size(), s.length());
            }
        }
    }
}

TEST(ToyModel, DeterministicPerSeed) {
    const auto tokens = random_tokens(3, 12);
    const auto a = forward(ToyTransformer(ToyConfig{.seed = 9}), tokens);
    const auto b = forward(ToyTransformer(ToyConfig{.seed = 9}), tokens);
    const auto c = forward(ToyTransformer(ToyConfig{.seed = 10}), tokens);
    EXPECT_TRUE(std::equal(a.logits.data().begin(), a.logits.data().end(), b.logits.data().begin()));
    EXPECT_FALSE(std::equal(a.logits.data().begin(), a.logits.data().end(), c.logits.data().begin()));
}

TEST(ToyModel, InputErrors) {
    const ToyTransformer model(ToyConfig{});
    expect_error([&] { forward(model, std::vector<int>{1, 256}); }, ErrorKind::data, "invalid_token");
    expect_error([&] { forward(model, std::vector<int>(129, 1)); }, ErrorKind::data, "overlong_input");
    expect_error([] { ToyTransformer(ToyConfig{.d_model = 30, .n_heads = 4}); }, ErrorKind::config,
                 "bad_model_config");
}

TEST(ToyModel, GreedyInvariantUnderLogitScaling) {
    const ToyTransformer model(ToyConfig{.seed = 4});
    Session s(model);
    int tok = 'a';
    for (int i = 0; i < 40; ++i) {
        auto out = s.step(tok);
        const int greedy = argmax(out.logits);
        for (auto& v : out.logits) {
            v *= 3.5f;
        }
        EXPECT_EQ(argmax(out.logits), greedy);
        tok = greedy;
    }
}

TEST(Hook, OffModeMatchesHooklessGeneration) {
    const auto& p = planted();
    const auto spec = make_hook_spec(p.ws, p.probe, p.config, HookMode::off);
    for (const auto& prompt : dataset_prompts(p.ws.dataset, 10)) {
        const auto plain = generate(p.model, prompt, 20, nullptr);
        const auto off = generate(p.model, prompt, 20, &spec);
        EXPECT_EQ(plain.tokens, off.tokens);
        for (const auto& st : off.steps) {
            EXPECT_FALSE(st.fired);
            EXPECT_EQ(st.attenuation_l1, 0.0);
        }
    }
}

TEST(Hook, ThetaOneNeverFires) {
    const auto& p = planted();
    auto spec = make_hook_spec(p.ws, p.probe, p.config, HookMode::adaptive);
    spec.config.theta = 1.0;
    const auto off = make_hook_spec(p.ws, p.probe, p.config, HookMode::off);
    for (const auto& prompt : dataset_prompts(p.ws.dataset, 10)) {
        const auto a = generate(p.model, prompt, 20, &spec);
        const auto b = generate(p.model, prompt, 20, &off);
        EXPECT_EQ(a.tokens, b.tokens);
        const auto la = continuation_log_probs(p.model, std::span(prompt).first(1), std::span(prompt).subspan(1), &spec);
        const auto lb = continuation_log_probs(p.model, std::span(prompt).first(1), std::span(prompt).subspan(1), nullptr);
        EXPECT_EQ(la, lb);
    }
}

TEST(Hook, TraceConsistency) {
    const auto& p = planted();
    for (HookMode mode : {HookMode::adaptive, HookMode::static_}) {
        const auto spec = make_hook_spec(p.ws, p.probe, p.config, mode);
        std::size_t fired = 0;
        for (const auto& prompt : dataset_prompts(p.ws.dataset, 30)) {
            const auto trace = generate(p.model, prompt, 10, &spec);
            ASSERT_EQ(trace.steps.size(), trace.tokens.size());
            for (const auto& st : trace.steps) {
                EXPECT_EQ(st.fired, st.confidence > spec.config.theta);
                if (!st.fired) {
                    EXPECT_EQ(st.attenuation_l1, 0.0);
                    EXPECT_EQ(st.post_confidence, st.confidence);
                }
                fired += st.fired;
            }
        }
        EXPECT_GT(fired, 0u) << to_string(mode);
    }
}

TEST(Hook, EditsOnlyHNodesAtHookLayer) {
    const auto& p = planted();
    const auto spec = make_hook_spec(p.ws, p.probe, p.config, HookMode::adaptive);
    std::vector<bool> is_h(64, false);
    for (auto j : p.config.h_nodes) {
        is_h[j] = true;
    }
    for (const auto& prompt : dataset_prompts(p.ws.dataset, 20)) {
        Session plain(p.model), hooked(p.model);
        CancellationHook hook(spec);
        for (std::size_t t = 0; t < prompt.size(); ++t) {
            const auto a = plain.step(prompt[t]);
            const auto b = hooked.step(prompt[t], &hook);
            for (std::size_t j = 0; j < 64; ++j) {
                if (!is_h[j]) {
                    ASSERT_EQ(a.hidden(spec.layer, j), b.hidden(spec.layer, j));
                }
            }
        }
    }
}

TEST(Hook, LowersContinuationConfidenceOverHundredPrompts) {
    const auto& p = planted();
    const auto adaptive = make_hook_spec(p.ws, p.probe, p.config, HookMode::adaptive);
    const auto off = make_hook_spec(p.ws, p.probe, p.config, HookMode::off);
    const auto prompts = dataset_prompts(p.ws.dataset, 100);
    ASSERT_EQ(prompts.size(), 100u);
    double hooked = 0.0, baseline = 0.0;
    std::size_t n = 0;
    for (const auto& prompt : prompts) {
        const auto a = generate(p.model, prompt, 8, &adaptive);
        const auto b = generate(p.model, prompt, 8, &off);
        for (std::size_t s = 0; s < a.steps.size(); ++s) {
            hooked += a.steps[s].post_confidence;
            baseline += b.steps[s].confidence;
            ++n;
        }
    }
    EXPECT_LT(hooked / static_cast<double>(n), baseline / static_cast<double>(n));
}

TEST(Hook, DeterministicTrace) {
    const auto& p = planted();
    const auto spec = make_hook_spec(p.ws, p.probe, p.config, HookMode::adaptive);
    const auto prompt = dataset_prompts(p.ws.dataset, 1).front();
    const auto a = generate(p.model, prompt, 25, &spec);
    const auto b = generate(p.model, prompt, 25, &spec);
    EXPECT_EQ(a.tokens, b.tokens);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        EXPECT_EQ(a.steps[i].confidence, b.steps[i].confidence);
        EXPECT_EQ(a.steps[i].attenuation_l1, b.steps[i].attenuation_l1);
    }
}

TEST(Hook, SpecValidation) {
    const auto& p = planted();
    auto spec = make_hook_spec(p.ws, p.probe, p.config, HookMode::adaptive);
    spec.layer = 5;
    expect_error([&] { spec.validate(p.model.config()); }, ErrorKind::config, "bad_hook_layer");
    spec = make_hook_spec(p.ws, p.probe, p.config, HookMode::adaptive);
    spec.probe.weights.pop_back();
    expect_error([&] { spec.validate(p.model.config()); }, ErrorKind::config, "probe_dimension");
    expect_error([] { parse_hook_mode("loud"); }, ErrorKind::config, "unknown_hook_mode");
}

TEST(Planted, BalancedAndSeparable) {
    const ToyTransformer model(toy_config_for(7));
    const auto corpus = make_planted_corpus(model, 7, 200);
    const auto labels = corpus.dataset.labels();
    EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 100);
    EXPECT_EQ(corpus.prompts.size(), 200u);
    const auto ws = make_workspace(corpus.dataset);
    EXPECT_GE(train_layer_probe(ws, 0, Pooling::last_token, 1.0).eval_auc, 0.95);
}

TEST(Planted, SingleClassRequestFailsAtSplit) {
    const ToyTransformer model(toy_config_for(7));
    const auto corpus = make_planted_corpus(model, 7, 32, {.positive_fraction = 0.0});
    expect_error([&] { assign_splits(corpus.dataset); }, ErrorKind::data, "stratification");
}
