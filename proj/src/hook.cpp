#include "aac/hook.hpp"

#include <cmath>
#include <optional>

#include "aac/cancellation.hpp"

namespace aac {

const char* to_string(HookMode mode) {
    switch (mode) {
    case HookMode::off: return "off";
    case HookMode::adaptive: return "adaptive";
    case HookMode::static_: return "static";
    case HookMode::iti: return "iti";
    }
    return "?";
}

HookMode parse_hook_mode(const std::string& name) {
    for (HookMode m : {HookMode::off, HookMode::adaptive, HookMode::static_, HookMode::iti}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    fail(ErrorKind::config, "unknown_hook_mode", "unknown hook mode '" + name + "'");
}

void HookSpec::validate(const ToyConfig& model) const {
    if (layer > model.n_layers) {
        fail(ErrorKind::config, "bad_hook_layer",
             "hook layer " + std::to_string(layer) + " exceeds model depth " + std::to_string(model.n_layers));
    }
    if (probe.weights.size() != model.d_model) {
        fail(ErrorKind::config, "probe_dimension",
             "probe has " + std::to_string(probe.weights.size()) + " weights, model d_model is " +
                 std::to_string(model.d_model));
    }
    config.validate(model.d_model);
    if (mode == HookMode::iti && iti_direction.size() != model.d_model) {
        fail(ErrorKind::config, "bad_iti_direction", "iti mode needs a direction of length d_model");
    }
}

void CancellationHook::on_residual(std::size_t layer, std::span<float> hidden) {
    const HookSpec& spec = *spec_;
    if (layer != spec.layer) {
        return;
    }
    const std::vector<double> h(hidden.begin(), hidden.end());
    StepTrace st;
    st.confidence = spec.probe.confidence(h);
    st.post_confidence = st.confidence;
    st.fired = spec.mode != HookMode::off && st.confidence > spec.config.theta;
    if (st.fired) {
        std::vector<double> edited;
        switch (spec.mode) {
        case HookMode::adaptive: edited = attenuate_adaptive(h, spec.config, st.confidence); break;
        case HookMode::static_: edited = attenuate_adaptive(h, spec.config, 1.0); break;
        case HookMode::iti: edited = cancel_iti(h, spec.iti_direction, spec.iti_alpha); break;
        case HookMode::off: break;
        }
        double l1 = 0.0;
        for (std::size_t j = 0; j < hidden.size(); ++j) {
            const float before = hidden[j];
            hidden[j] = static_cast<float>(edited[j]);
            l1 += std::abs(static_cast<double>(before) - static_cast<double>(hidden[j]));
        }
        st.attenuation_l1 = l1;
        st.post_confidence = spec.probe.confidence(std::span<const float>(hidden.data(), hidden.size()));
    }
    steps_.push_back(st);
}

GenerationTrace generate(const ToyTransformer& model, std::span<const int> prompt, std::size_t max_new_tokens,
                         const HookSpec* hook) {
    if (prompt.empty()) {
        fail(ErrorKind::data, "empty_prompt", "generation needs a non-empty prompt");
    }
    if (prompt.size() > model.config().max_seq) {
        fail(ErrorKind::data, "overlong_input", "prompt exceeds max_seq");
    }
    if (hook != nullptr) {
        hook->validate(model.config());
    }
    GenerationTrace trace;
    trace.prompt.assign(prompt.begin(), prompt.end());
    Session session(model);
    std::optional<CancellationHook> active;
    if (hook != nullptr) {
        active.emplace(*hook);
    }
    for (std::size_t t = 0; t + 1 < prompt.size(); ++t) {
        session.step(prompt[t]);
    }
    int current = prompt.back();
    for (std::size_t i = 0; i < max_new_tokens && session.length() < model.config().max_seq; ++i) {
        const auto out = session.step(current, active ? &*active : nullptr);
        current = argmax(out.logits);
        trace.tokens.push_back(current);
        StepTrace st;
        if (active && !active->steps().empty()) {
            st = active->steps().back();
        }
        st.token = current;
        trace.steps.push_back(st);
    }
    return trace;
}

std::vector<double> continuation_log_probs(const ToyTransformer& model, std::span<const int> context,
                                           std::span<const int> continuation, const HookSpec* hook,
                                           std::vector<MatrixF>* hidden) {
    if (context.empty()) {
        fail(ErrorKind::data, "empty_prompt", "scoring needs a non-empty context");
    }
    if (context.size() + continuation.size() > model.config().max_seq + 1) {
        fail(ErrorKind::data, "overlong_input", "context plus continuation exceeds max_seq");
    }
    if (hook != nullptr) {
        hook->validate(model.config());
    }
    std::optional<CancellationHook> active;
    if (hook != nullptr) {
        active.emplace(*hook);
    }
    Session session(model);
    for (std::size_t t = 0; t + 1 < context.size(); ++t) {
        session.step(context[t]);
    }
    std::vector<double> out;
    int current = context.back();
    for (int next : continuation) {
        auto step = session.step(current, active ? &*active : nullptr);
        out.push_back(log_prob(step.logits, next));
        if (hidden != nullptr) {
            hidden->push_back(std::move(step.hidden));
        }
        current = next;
    }
    return out;
}

std::vector<int> to_tokens(const std::string& text) {
    std::vector<int> out;
    out.reserve(text.size());
    for (unsigned char c : text) {
        out.push_back(static_cast<int>(c));
    }
    return out;
}

std::string to_text(std::span<const int> tokens) {
    std::string out;
    for (int t : tokens) {
        out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
    }
    return out;
}

} // namespace aac
