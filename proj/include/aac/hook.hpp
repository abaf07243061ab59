#pragma once

#include <span>
#include <string>
#include <vector>

#include "aac/hnode.hpp"
#include "aac/probing.hpp"
#include "aac/toy_model.hpp"

namespace aac {

enum class HookMode { off, adaptive, static_, iti };

const char* to_string(HookMode mode);
HookMode parse_hook_mode(const std::string& name);

struct HookSpec {
    std::size_t layer = 0;
    Probe probe;
    HNodeConfig config;
    HookMode mode = HookMode::adaptive;
    std::vector<double> iti_direction; // iti mode only
    double iti_alpha = 10.0;

    /// Throws aac::Error (config) if the spec does not fit the model.
    void validate(const ToyConfig& model) const;
};

struct StepTrace {
    int token = 0;              // token emitted at this step
    double confidence = 0.0;    // probe confidence before any edit
    double post_confidence = 0.0;
    bool fired = false;         // confidence > theta and mode != off
    double attenuation_l1 = 0.0;
};

struct GenerationTrace {
    std::vector<int> prompt;
    std::vector<int> tokens;
    std::vector<StepTrace> steps;
};

/// The real-time hook. Scores the residual at `spec.layer` and, when the probe
/// confidence exceeds theta, edits it before later layers run. Each call at
/// the hooked layer appends one StepTrace.
class CancellationHook final : public ResidualHook {
public:
    explicit CancellationHook(const HookSpec& spec) : spec_(&spec) {}

    void on_residual(std::size_t layer, std::span<float> hidden) override;

    const std::vector<StepTrace>& steps() const noexcept { return steps_; }
    std::vector<StepTrace>& steps() noexcept { return steps_; }

private:
    const HookSpec* spec_;
    std::vector<StepTrace> steps_;
};

/// Greedy decoding. Prompt positions before the last run unhooked; the hook is
/// active on the last prompt position and on every generated position.
/// `hook == nullptr` decodes without any hook or probe.
GenerationTrace generate(const ToyTransformer& model, std::span<const int> prompt, std::size_t max_new_tokens,
                         const HookSpec* hook);

/// Log-probabilities of `continuation` given `context` under teacher forcing.
/// The hook (if any) is active on every position whose output is scored.
/// When `hidden` is non-null it receives each scored position's residual stack.
std::vector<double> continuation_log_probs(const ToyTransformer& model, std::span<const int> context,
                                           std::span<const int> continuation, const HookSpec* hook,
                                           std::vector<MatrixF>* hidden = nullptr);

std::vector<int> to_tokens(const std::string& text);
std::string to_text(std::span<const int> tokens);

} // namespace aac
