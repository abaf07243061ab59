#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aac/anc.hpp"
#include "aac/cancellation.hpp"
#include "aac/error.hpp"
#include "aac/hnode.hpp"
#include "aac/hook.hpp"
#include "aac/probing.hpp"

namespace aac {

using Json = nlohmann::json;

/// Common header: schema_version, kind, model_config.
Json document(const std::string& kind, const std::string& model_config);

Json probe_to_json(const Probe& probe, const std::string& model_config);
/// Validates against the probe schema first (schema error on mismatch).
Probe probe_from_json(const Json& doc);

Json layer_sweep_to_json(const LayerSweepResult& sweep, double lambda, const std::string& model_config);

Json hnode_config_to_json(const HNodeConfig& config, std::size_t k_requested, const std::string& model_config,
                          std::span<const NeuronProfile> profiles = {});
HNodeConfig hnode_config_from_json(const Json& doc);

Json report_fields(const CancellationReport& report);
Json cancellation_to_json(std::span<const CancellationReport> reports, const ItiSweep* iti,
                          const std::string& model_config);
Json percentile_sweep_to_json(std::span<const PercentilePoint> points, const std::string& model_config);
Json ablation_to_json(const AblationResult& ablation, const std::string& model_config);

Json trace_to_json(const GenerationTrace& trace);
Json generation_to_json(std::span<const GenerationTrace> traces, const HookSpec* hook, std::size_t max_new_tokens,
                        const std::string& model_config);

Json anc_to_json(const AncMetrics& metrics, std::size_t taps, double mu, std::size_t length, std::size_t tail,
                 std::uint64_t seed, double stability_bound);

Json error_to_json(const Error& error);

/// nullopt -> null
Json optional_number(const std::optional<double>& v);

/// Validates `doc` against its schema, then writes it pretty-printed.
void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

} // namespace aac
