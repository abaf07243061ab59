#include "aac/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "aac/schema.hpp"

namespace aac {

Json document(const std::string& kind, const std::string& model_config) {
    Json doc = Json::object();
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = kind;
    doc["model_config"] = model_config;
    return doc;
}

Json optional_number(const std::optional<double>& v) {
    return v ? Json(*v) : Json(nullptr);
}

namespace {

Json finite_or_null(double v) {
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

// Printable ASCII kept, every other byte rendered as \xHH.
std::string printable(std::span<const int> tokens) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (int t : tokens) {
        if (t >= 32 && t < 127 && t != '\\') {
            out.push_back(static_cast<char>(t));
        } else {
            out += "\\x";
            out.push_back(hex[(t >> 4) & 0xf]);
            out.push_back(hex[t & 0xf]);
        }
    }
    return out;
}

} // namespace

Json probe_to_json(const Probe& probe, const std::string& model_config) {
    Json doc = document("probe", model_config);
    doc["layer"] = probe.layer;
    doc["pooling"] = to_string(probe.pooling);
    doc["hidden_dim"] = probe.weights.size();
    doc["weights"] = probe.weights;
    doc["bias"] = probe.bias;
    doc["lambda"] = probe.lambda;
    doc["train_auc"] = probe.train_auc;
    doc["eval_auc"] = probe.eval_auc;
    return doc;
}

Probe probe_from_json(const Json& doc) {
    validate_document(doc, "probe");
    Probe p;
    p.layer = doc["layer"].get<std::size_t>();
    p.pooling = doc["pooling"] == "mean" ? Pooling::mean : Pooling::last_token;
    p.weights = doc["weights"].get<std::vector<double>>();
    p.bias = doc["bias"].get<double>();
    p.lambda = doc["lambda"].get<double>();
    p.train_auc = doc["train_auc"].get<double>();
    p.eval_auc = doc["eval_auc"].get<double>();
    if (p.weights.size() != doc["hidden_dim"].get<std::size_t>()) {
        fail(ErrorKind::schema, "inconsistent_dimensions", "probe weights length differs from hidden_dim");
    }
    return p;
}

Json layer_sweep_to_json(const LayerSweepResult& sweep, double lambda, const std::string& model_config) {
    Json doc = document("layer_sweep", model_config);
    doc["lambda"] = lambda;
    doc["best_layer"] = sweep.best_layer;
    Json rows = Json::array();
    for (const auto& l : sweep.layers) {
        rows.push_back({{"layer", l.layer},
                        {"last_token_auc", l.last_token_auc},
                        {"mean_pool_auc", l.mean_pool_auc},
                        {"gain", l.gain},
                        {"cohens_d", finite_or_null(l.cohens_d)},
                        {"centroid_distance", l.centroid_distance},
                        {"confidence_gap", l.confidence_gap}});
    }
    doc["layers"] = std::move(rows);
    doc["best_probe"] = probe_to_json(sweep.last_token_probes.at(sweep.best_layer), model_config);
    return doc;
}

Json hnode_config_to_json(const HNodeConfig& config, std::size_t k_requested, const std::string& model_config,
                          std::span<const NeuronProfile> profiles) {
    Json doc = document("hnode_config", model_config);
    doc["layer"] = config.layer;
    doc["k_requested"] = k_requested;
    doc["k_effective"] = config.k;
    doc["percentile"] = config.percentile;
    doc["alpha"] = config.alpha;
    doc["theta"] = config.theta;
    doc["h_nodes"] = config.h_nodes;
    doc["anti_nodes"] = config.anti_nodes;
    doc["baseline"] = config.baseline;
    doc["anti_baseline"] = config.anti_baseline;
    doc["grounded_mean"] = config.grounded_mean;
    Json prof = Json::array();
    for (const auto& p : profiles) {
        prof.push_back({{"rank", p.rank},
                        {"neuron", p.neuron},
                        {"weight", p.weight},
                        {"hallucinated_mean", p.hallucinated_mean},
                        {"grounded_mean", p.grounded_mean},
                        {"gap", p.gap},
                        {"max_activation", p.max_activation},
                        {"max_prompt_id", p.max_prompt_id},
                        {"max_excerpt", p.max_excerpt}});
    }
    doc["profiles"] = std::move(prof);
    return doc;
}

HNodeConfig hnode_config_from_json(const Json& doc) {
    validate_document(doc, "hnode_config");
    HNodeConfig c;
    c.layer = doc["layer"].get<std::size_t>();
    c.k = doc["k_effective"].get<std::size_t>();
    c.percentile = doc["percentile"].get<double>();
    c.alpha = doc["alpha"].get<double>();
    c.theta = doc["theta"].get<double>();
    c.h_nodes = doc["h_nodes"].get<std::vector<std::size_t>>();
    c.anti_nodes = doc["anti_nodes"].get<std::vector<std::size_t>>();
    c.baseline = doc["baseline"].get<std::vector<double>>();
    c.anti_baseline = doc["anti_baseline"].get<std::vector<double>>();
    c.grounded_mean = doc["grounded_mean"].get<std::vector<double>>();
    return c;
}

Json report_fields(const CancellationReport& r) {
    return {{"strategy", to_string(r.strategy)},
            {"reduc", r.reduc},
            {"drift", r.drift},
            {"selectivity", optional_number(r.selectivity)},
            {"sep_delta", r.sep_delta},
            {"supp_pct", r.supp_pct},
            {"l1_suppression", r.l1_suppression},
            {"mean_conf_hallucinated_before", r.mean_conf_hallucinated_before},
            {"mean_conf_grounded_before", r.mean_conf_grounded_before},
            {"mean_conf_hallucinated_after", r.mean_conf_hallucinated_after},
            {"mean_conf_grounded_after", r.mean_conf_grounded_after},
            {"iti_alpha", optional_number(r.iti_alpha)},
            {"n_samples", r.before.size()}};
}

Json cancellation_to_json(std::span<const CancellationReport> reports, const ItiSweep* iti,
                          const std::string& model_config) {
    Json doc = document("cancellation", model_config);
    Json rows = Json::array();
    for (const auto& r : reports) {
        rows.push_back(report_fields(r));
    }
    doc["reports"] = std::move(rows);
    if (iti != nullptr) {
        Json sweep = Json::array();
        for (const auto& r : iti->reports) {
            sweep.push_back(report_fields(r));
        }
        doc["iti_sweep"] = {{"reports", std::move(sweep)}, {"best", iti->best}};
    } else {
        doc["iti_sweep"] = nullptr;
    }
    return doc;
}

Json percentile_sweep_to_json(std::span<const PercentilePoint> points, const std::string& model_config) {
    Json doc = document("percentile_sweep", model_config);
    Json rows = Json::array();
    for (const auto& p : points) {
        Json row = report_fields(p.report);
        row["percentile"] = p.percentile;
        row["separation"] = p.separation;
        rows.push_back(std::move(row));
    }
    doc["points"] = std::move(rows);
    return doc;
}

Json ablation_to_json(const AblationResult& a, const std::string& model_config) {
    Json doc = document("ablation", model_config);
    doc["static"] = report_fields(a.static_report);
    doc["adaptive"] = report_fields(a.adaptive_report);
    doc["drift_reduction_pct"] = optional_number(a.drift_reduction_pct);
    return doc;
}

Json trace_to_json(const GenerationTrace& trace) {
    Json steps = Json::array();
    for (const auto& s : trace.steps) {
        steps.push_back({{"token", s.token},
                         {"confidence", s.confidence},
                         {"post_confidence", s.post_confidence},
                         {"fired", s.fired},
                         {"attenuation_l1", s.attenuation_l1}});
    }
    return {{"prompt", printable(trace.prompt)},
            {"prompt_tokens", trace.prompt},
            {"tokens", trace.tokens},
            {"text", printable(trace.tokens)},
            {"steps", std::move(steps)}};
}

Json generation_to_json(std::span<const GenerationTrace> traces, const HookSpec* hook, std::size_t max_new_tokens,
                        const std::string& model_config) {
    Json doc = document("generation", model_config);
    doc["mode"] = hook != nullptr ? to_string(hook->mode) : "none";
    doc["layer"] = hook != nullptr ? Json(hook->layer) : Json(nullptr);
    doc["theta"] = hook != nullptr ? Json(hook->config.theta) : Json(nullptr);
    doc["alpha"] = hook != nullptr ? Json(hook->config.alpha) : Json(nullptr);
    doc["max_new_tokens"] = max_new_tokens;
    Json rows = Json::array();
    for (const auto& t : traces) {
        rows.push_back(trace_to_json(t));
    }
    doc["traces"] = std::move(rows);
    return doc;
}

Json anc_to_json(const AncMetrics& m, std::size_t taps, double mu, std::size_t length, std::size_t tail,
                 std::uint64_t seed, double stability_bound) {
    Json doc = document("anc_metrics", "lms-anc-benchmark");
    doc["taps"] = taps;
    doc["mu"] = mu;
    doc["length"] = length;
    doc["tail"] = tail;
    doc["seed"] = seed;
    doc["stability_bound"] = stability_bound;
    doc["diverged"] = m.diverged;
    doc["input_noise_power"] = finite_or_null(m.input_noise_power);
    doc["residual_noise_power"] = finite_or_null(m.residual_noise_power);
    doc["reduction_db"] = finite_or_null(m.reduction_db);
    Json w = Json::array();
    for (double x : m.weights) {
        w.push_back(finite_or_null(x));
    }
    doc["weights"] = std::move(w);
    return doc;
}

Json error_to_json(const Error& error) {
    Json doc = Json::object();
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = "error";
    doc["error_kind"] = to_string(error.kind());
    doc["code"] = error.code();
    doc["message"] = error.what();
    doc["exit_code"] = exit_code(error.kind());
    return doc;
}

void write_json(const std::filesystem::path& path, const Json& doc) {
    validate_document(doc);
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorKind::data, "io", "cannot open " + path.string() + " for writing");
    }
    out << doc.dump(2, ' ', false, Json::error_handler_t::replace) << '\n';
    if (!out) {
        fail(ErrorKind::data, "io", "failed writing " + path.string());
    }
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::data, "io", "cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::schema, "bad_json", path.string() + ": " + e.what());
    }
}

} // namespace aac
