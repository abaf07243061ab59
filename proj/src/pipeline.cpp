#include "aac/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aac/evaluation.hpp"
#include "aac/planted.hpp"
#include "aac/rng.hpp"
#include "aac/schema.hpp"

namespace aac {

namespace {

[[noreturn]] void bad_config(const std::string& msg) {
    fail(ErrorKind::config, "bad_config", msg);
}

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        bad_config(std::string("config field '") + key + "' has the wrong type");
    }
}

double mean_of(std::span<const double> v) {
    if (v.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (double x : v) {
        acc += x;
    }
    return acc / static_cast<double>(v.size());
}

Json metrics_json(const DownstreamMetrics& m) {
    return {{"accuracy", m.accuracy}, {"hall_rate", m.hall_rate}, {"roc_auc", m.roc_auc}};
}

Json activation_metrics(const CancellationReport& r) {
    return {{"strategy", to_string(r.strategy)},
            {"reduc", r.reduc},
            {"drift", r.drift},
            {"selectivity", optional_number(r.selectivity)},
            {"sep_delta", r.sep_delta},
            {"supp_pct", r.supp_pct}};
}

std::string csv_number(const Json& v) {
    return v.is_null() ? std::string{} : v.dump();
}

std::string csv_text(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

} // namespace

void PipelineConfig::validate() const {
    const ToyConfig toy;
    if (k < 1) bad_config("k must be at least 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) bad_config("alpha must lie in (0, 1]");
    if (!(theta > 0.0 && theta <= 1.0)) bad_config("theta must lie in (0, 1]");
    if (!(percentile > 0.0 && percentile < 100.0)) bad_config("percentile must lie in (0, 100)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad_config("lambda must be a finite nonnegative number");
    if (max_new_tokens < 1 || max_new_tokens > toy.max_seq - 1) bad_config("max_new_tokens must lie in [1, 127]");
    if (n_samples < 16) bad_config("n_samples must be at least 16");
    if (gen_prompts < 1) bad_config("gen_prompts must be at least 1");
    if (mc_items < 1) bad_config("mc_items must be at least 1");
    if (text_count < 1) bad_config("text_count must be at least 1");
    if (text_length < 2 || text_length > toy.max_seq) bad_config("text_length must lie in [2, 128]");
    if (out_dir.empty()) bad_config("out_dir must not be empty");
}

void apply_config_json(PipelineConfig& c, const Json& j) {
    if (!j.is_object()) {
        bad_config("config must be a JSON object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "k") read_field(j, "k", c.k);
        else if (key == "alpha") read_field(j, "alpha", c.alpha);
        else if (key == "theta") read_field(j, "theta", c.theta);
        else if (key == "percentile") read_field(j, "percentile", c.percentile);
        else if (key == "lambda") read_field(j, "lambda", c.lambda);
        else if (key == "seed") read_field(j, "seed", c.seed);
        else if (key == "max_new_tokens") read_field(j, "max_new_tokens", c.max_new_tokens);
        else if (key == "n_samples") read_field(j, "n_samples", c.n_samples);
        else if (key == "gen_prompts") read_field(j, "gen_prompts", c.gen_prompts);
        else if (key == "mc_items") read_field(j, "mc_items", c.mc_items);
        else if (key == "text_count") read_field(j, "text_count", c.text_count);
        else if (key == "text_length") read_field(j, "text_length", c.text_length);
        else if (key == "activations") read_field(j, "activations", c.activations);
        else if (key == "probe") read_field(j, "probe", c.probe);
        else if (key == "hnodes") read_field(j, "hnodes", c.hnodes);
        else if (key == "out_dir") read_field(j, "out_dir", c.out_dir);
        else bad_config("unknown config field '" + key + "'");
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::config, "bad_config", "cannot open config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    Json j;
    try {
        j = Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::config, "bad_config", path.string() + ": " + e.what());
    }
    PipelineConfig c;
    apply_config_json(c, j);
    c.validate();
    return c;
}

Json config_to_json(const PipelineConfig& c) {
    return {{"k", c.k},
            {"alpha", c.alpha},
            {"theta", c.theta},
            {"percentile", c.percentile},
            {"lambda", c.lambda},
            {"seed", c.seed},
            {"max_new_tokens", c.max_new_tokens},
            {"n_samples", c.n_samples},
            {"gen_prompts", c.gen_prompts},
            {"mc_items", c.mc_items},
            {"text_count", c.text_count},
            {"text_length", c.text_length}};
}

ToyConfig toy_config_for(std::uint64_t seed) {
    ToyConfig tc;
    tc.seed = seed;
    return tc;
}

std::string model_config_label(const ActivationDataset& dataset) {
    return dataset.model_id;
}

bool toy_model_matches(const ActivationDataset& dataset, std::uint64_t seed) {
    const ToyConfig tc = toy_config_for(seed);
    const std::string expected = "toy-transformer/seed=" + std::to_string(seed) + "/d=" +
                                 std::to_string(tc.d_model) + "/layers=" + std::to_string(tc.n_layers);
    return dataset.model_id == expected && dataset.hidden_dim == tc.d_model;
}

Workspace make_workspace(ActivationDataset dataset) {
    dataset.validate();
    Workspace ws;
    ws.splits = assign_splits(dataset);
    ws.model_config = model_config_label(dataset);
    ws.dataset = std::move(dataset);
    return ws;
}

Probe train_layer_probe(const Workspace& ws, std::size_t layer, Pooling pooling, double lambda) {
    if (layer >= ws.dataset.layer_count) {
        fail(ErrorKind::config, "bad_layer",
             "layer " + std::to_string(layer) + " out of range, dataset has " +
                 std::to_string(ws.dataset.layer_count) + " layers");
    }
    const auto train = ws.splits.indices(Split::train);
    const auto eval = ws.splits.indices(Split::eval);
    Probe probe = train_probe(gather_features(ws.dataset, train, layer, pooling), gather_labels(ws.dataset, train),
                              lambda);
    probe.layer = layer;
    probe.pooling = pooling;
    probe.eval_auc = roc_auc(probe_confidences(probe, gather_features(ws.dataset, eval, layer, pooling)),
                             gather_labels(ws.dataset, eval));
    return probe;
}

std::size_t effective_k(std::size_t k, std::size_t hidden_dim) {
    return std::min(k, hidden_dim / 2);
}

HNodeConfig fit_hnodes(const Workspace& ws, const Probe& probe, const PipelineConfig& config) {
    HNodeParams p;
    p.k = effective_k(config.k, ws.dataset.hidden_dim);
    p.percentile = config.percentile;
    p.alpha = config.alpha;
    p.theta = config.theta;
    return build_hnode_config(probe, ws.dataset, ws.splits, p);
}

std::vector<double> train_iti_direction(const Workspace& ws, std::size_t layer) {
    const auto train = ws.splits.indices(Split::train);
    return iti_direction(gather_features(ws.dataset, train, layer, Pooling::last_token),
                         gather_labels(ws.dataset, train));
}

CancelStage run_cancel_stage(const Workspace& ws, const Probe& probe, const HNodeConfig& config) {
    CancelStage out;
    const EvalSet eval = make_eval_set(ws.dataset, ws.splits, config.layer);
    StrategyContext ctx{&probe, &config, {}, 10.0};
    for (Strategy s : post_hoc_strategies()) {
        out.reports.push_back(evaluate_strategy(s, eval, ctx));
    }
    out.reports.push_back(evaluate_strategy(Strategy::hook, eval, ctx));
    const auto direction = train_iti_direction(ws, config.layer);
    out.iti = sweep_iti(eval, probe, direction);
    out.reports.push_back(out.iti.reports.at(out.iti.best));
    return out;
}

HookSpec make_hook_spec(const Workspace& ws, const Probe& probe, const HNodeConfig& config, HookMode mode,
                        double iti_alpha) {
    HookSpec spec;
    spec.layer = config.layer;
    spec.probe = probe;
    spec.config = config;
    spec.mode = mode;
    spec.iti_alpha = iti_alpha;
    if (mode == HookMode::iti) {
        spec.iti_direction = train_iti_direction(ws, config.layer);
    }
    return spec;
}

std::vector<std::vector<int>> dataset_prompts(const ActivationDataset& dataset, std::size_t count) {
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < dataset.samples.size() && out.size() < count; ++i) {
        auto tokens = to_tokens(dataset.samples[i].prompt_excerpt);
        if (!tokens.empty()) {
            out.push_back(std::move(tokens));
        }
    }
    return out;
}

Json gen_report(const ToyTransformer& model, const Workspace& ws, const Probe& probe, const HNodeConfig& config,
                const PipelineConfig& pc) {
    const HookSpec hook = make_hook_spec(ws, probe, config, HookMode::adaptive);
    const auto items = make_synthetic_mc_items(pc.seed, pc.mc_items, 4);

    const auto base_scores = score_mc_items(model, items, nullptr);
    const auto hook_scores = score_mc_items(model, items, &hook);

    auto f1_em = [&](const HookSpec* h) {
        double f1 = 0.0, em = 0.0;
        for (const auto& item : items) {
            std::size_t truth = 0;
            while (item.truth[truth] == 0) {
                ++truth;
            }
            const auto& ref = item.candidates[truth];
            const auto trace = generate(model, item.question, std::min(pc.max_new_tokens, ref.size()), h);
            f1 += token_f1(trace.tokens, ref);
            em += exact_match(trace.tokens, ref) ? 1.0 : 0.0;
        }
        const double n = static_cast<double>(items.size());
        return std::pair{f1 / n, em / n};
    };
    const auto [f1_base, em_base] = f1_em(nullptr);
    const auto [f1_hook, em_hook] = f1_em(&hook);

    Json baseline = {{"mc1", mc1_from_scores(base_scores, items)},
                     {"mc2", mc2_from_scores(base_scores, items)},
                     {"token_f1", f1_base},
                     {"exact_match", em_base}};
    Json hooked = {{"mc1", mc1_from_scores(hook_scores, items)},
                   {"mc2", mc2_from_scores(hook_scores, items)},
                   {"token_f1", f1_hook},
                   {"exact_match", em_hook}};
    Json delta = Json::object();
    for (const char* key : {"mc1", "mc2", "token_f1", "exact_match"}) {
        delta[key] = hooked[key].get<double>() - baseline[key].get<double>();
    }

    const EvalSet eval = make_eval_set(ws.dataset, ws.splits, config.layer);
    StrategyContext ctx{&probe, &config, {}, 10.0};
    const auto hook_report = evaluate_strategy(Strategy::hook, eval, ctx);

    const auto direction = train_iti_direction(ws, config.layer);
    const auto iti = sweep_iti(eval, probe, direction);
    const double iti_alpha = *iti.reports.at(iti.best).iti_alpha;
    const HookSpec iti_hook = make_hook_spec(ws, probe, config, HookMode::iti, iti_alpha);
    const auto iti_scores = score_mc_items(model, items, &iti_hook);

    const std::size_t late = model.config().n_layers;
    const std::size_t early = dola_early_layer(late);

    HookSpec off = hook;
    off.mode = HookMode::off;
    std::vector<double> off_conf, hook_conf;
    std::size_t fired = 0;
    const auto prompts = dataset_prompts(ws.dataset, pc.gen_prompts);
    for (const auto& prompt : prompts) {
        for (const auto& s : generate(model, prompt, pc.max_new_tokens, &off).steps) {
            off_conf.push_back(s.confidence);
        }
        for (const auto& s : generate(model, prompt, pc.max_new_tokens, &hook).steps) {
            hook_conf.push_back(s.post_confidence);
            fired += s.fired ? 1 : 0;
        }
    }

    Json doc = document("report", ws.model_config);
    doc["suite"] = "gen";
    doc["config"] = config_to_json(pc);
    doc["n_items"] = items.size();
    doc["activation"] = activation_metrics(hook_report);
    doc["baseline"] = std::move(baseline);
    doc["hooked"] = std::move(hooked);
    doc["delta"] = std::move(delta);
    doc["dola"] = {{"early_layer", early},
                   {"late_layer", late},
                   {"contrast", 0.5},
                   {"mc1", dola_mc1(model, items, early, late, 0.5)}};
    doc["iti_hook"] = {{"alpha", iti_alpha},
                       {"mc1", mc1_from_scores(iti_scores, items)},
                       {"mc2", mc2_from_scores(iti_scores, items)}};
    const double off_mean = mean_of(off_conf), hook_mean = mean_of(hook_conf);
    doc["continuation_confidence"] = {
        {"prompts", prompts.size()},
        {"steps", hook_conf.size()},
        {"off_mean", off_mean},
        {"hooked_mean", hook_mean},
        {"delta", hook_mean - off_mean},
        {"fired_fraction", hook_conf.empty() ? 0.0 : static_cast<double>(fired) / static_cast<double>(hook_conf.size())}};
    return doc;
}

Json downstream_report(const Workspace& ws, const Probe& probe, const HNodeConfig& config, const PipelineConfig& pc) {
    const EvalSet eval = make_eval_set(ws.dataset, ws.splits, config.layer);
    const auto base = downstream_baseline(eval, probe);
    const auto direction = train_iti_direction(ws, config.layer);
    const auto iti = sweep_iti(eval, probe, direction);

    Json rows = Json::array();
    auto add = [&](Strategy s, double iti_alpha) {
        StrategyContext ctx{&probe, &config, direction, iti_alpha};
        const auto m = downstream_accuracy(eval, s, ctx);
        Json row = metrics_json(m);
        row["strategy"] = to_string(s);
        row["iti_alpha"] = s == Strategy::iti ? Json(iti_alpha) : Json(nullptr);
        row["delta_accuracy"] = m.accuracy - base.accuracy;
        row["delta_hall_rate"] = m.hall_rate - base.hall_rate;
        row["delta_roc_auc"] = m.roc_auc - base.roc_auc;
        rows.push_back(std::move(row));
    };
    for (Strategy s : post_hoc_strategies()) {
        add(s, 10.0);
    }
    add(Strategy::hook, 10.0);
    add(Strategy::iti, *iti.reports.at(iti.best).iti_alpha);

    Json doc = document("report", ws.model_config);
    doc["suite"] = "downstream";
    doc["config"] = config_to_json(pc);
    doc["n_eval"] = eval.labels.size();
    doc["baseline"] = metrics_json(base);
    doc["strategies"] = std::move(rows);
    return doc;
}

Json capability_report(const ToyTransformer& model, const Workspace& ws, const Probe& probe,
                       const HNodeConfig& config, const PipelineConfig& pc) {
    const HookSpec hook = make_hook_spec(ws, probe, config, HookMode::adaptive);
    HookSpec surgical = hook;
    surgical.config.theta = 1.0;
    HookSpec off = hook;
    off.mode = HookMode::off;

    const auto texts = make_synthetic_text(pc.seed, pc.text_count, pc.text_length);
    double ppl_base = 0.0, ppl_hook = 0.0, ppl_surgical = 0.0, ppl_off = 0.0;
    bool surgical_identical = true, off_identical = true;
    for (const auto& text : texts) {
        const std::span<const int> t(text);
        const auto lp_base = continuation_log_probs(model, t.first(1), t.subspan(1), nullptr);
        const auto lp_hook = continuation_log_probs(model, t.first(1), t.subspan(1), &hook);
        const auto lp_surgical = continuation_log_probs(model, t.first(1), t.subspan(1), &surgical);
        const auto lp_off = continuation_log_probs(model, t.first(1), t.subspan(1), &off);
        surgical_identical = surgical_identical && lp_surgical == lp_base;
        off_identical = off_identical && lp_off == lp_base;
        ppl_base += perplexity_from_log_probs(lp_base);
        ppl_hook += perplexity_from_log_probs(lp_hook);
        ppl_surgical += perplexity_from_log_probs(lp_surgical);
        ppl_off += perplexity_from_log_probs(lp_off);
    }
    const double n = static_cast<double>(texts.size());
    ppl_base /= n;
    ppl_hook /= n;
    ppl_surgical /= n;
    ppl_off /= n;

    const auto items = make_synthetic_mc_items(derive_seed(pc.seed, "capability"), pc.mc_items, 4);
    const double acc_base = mc1(model, items, nullptr);
    const double acc_hook = mc1(model, items, &hook);

    Json doc = document("report", ws.model_config);
    doc["suite"] = "capability";
    doc["config"] = config_to_json(pc);
    doc["perplexity"] = {{"texts", texts.size()},
                         {"baseline", ppl_base},
                         {"hooked", ppl_hook},
                         {"delta_pct", 100.0 * (ppl_hook - ppl_base) / ppl_base},
                         {"surgical_theta", 1.0},
                         {"surgical", ppl_surgical},
                         {"surgical_delta_pct", 100.0 * (ppl_surgical - ppl_base) / ppl_base},
                         {"surgical_bit_identical", surgical_identical},
                         {"off", ppl_off},
                         {"off_bit_identical", off_identical}};
    doc["mc_accuracy"] = {{"items", items.size()},
                          {"baseline", acc_base},
                          {"hooked", acc_hook},
                          {"delta", acc_hook - acc_base}};
    return doc;
}

PlotTables emit_plot_data(const std::vector<Json>& reports) {
    std::ostringstream layers, sel, pct, abl;
    layers << "model_config,layer,last_token_auc,mean_pool_auc,gain,cohens_d,centroid_distance,confidence_gap\n";
    sel << "model_config,strategy,iti_alpha,reduc,drift,sel,sep_delta,supp_pct,l1_suppression\n";
    pct << "model_config,percentile,reduc,drift,sel,separation,l1_suppression\n";
    abl << "model_config,static_reduc,static_drift,static_sel,adaptive_reduc,adaptive_drift,adaptive_sel,"
           "drift_reduction_pct\n";
    for (const auto& doc : reports) {
        validate_document(doc);
        const std::string kind = doc["kind"].get<std::string>();
        const std::string mc = csv_text(doc["model_config"].get<std::string>());
        if (kind == "layer_sweep") {
            for (const auto& l : doc["layers"]) {
                layers << mc << ',' << csv_number(l["layer"]) << ',' << csv_number(l["last_token_auc"]) << ','
                       << csv_number(l["mean_pool_auc"]) << ',' << csv_number(l["gain"]) << ','
                       << csv_number(l["cohens_d"]) << ',' << csv_number(l["centroid_distance"]) << ','
                       << csv_number(l["confidence_gap"]) << '\n';
            }
        } else if (kind == "cancellation") {
            for (const auto& r : doc["reports"]) {
                sel << mc << ',' << r["strategy"].get<std::string>() << ',' << csv_number(r["iti_alpha"]) << ','
                    << csv_number(r["reduc"]) << ',' << csv_number(r["drift"]) << ','
                    << csv_number(r["selectivity"]) << ',' << csv_number(r["sep_delta"]) << ','
                    << csv_number(r["supp_pct"]) << ',' << csv_number(r["l1_suppression"]) << '\n';
            }
        } else if (kind == "percentile_sweep") {
            for (const auto& p : doc["points"]) {
                pct << mc << ',' << csv_number(p["percentile"]) << ',' << csv_number(p["reduc"]) << ','
                    << csv_number(p["drift"]) << ',' << csv_number(p["selectivity"]) << ','
                    << csv_number(p["separation"]) << ',' << csv_number(p["l1_suppression"]) << '\n';
            }
        } else if (kind == "ablation") {
            const auto& s = doc["static"];
            const auto& a = doc["adaptive"];
            abl << mc << ',' << csv_number(s["reduc"]) << ',' << csv_number(s["drift"]) << ','
                << csv_number(s["selectivity"]) << ',' << csv_number(a["reduc"]) << ',' << csv_number(a["drift"])
                << ',' << csv_number(a["selectivity"]) << ',' << csv_number(doc["drift_reduction_pct"]) << '\n';
        }
    }
    return {layers.str(), sel.str(), pct.str(), abl.str()};
}

void write_plot_data(const PlotTables& tables, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const std::pair<const char*, const std::string*> files[] = {{"layer_sweep.csv", &tables.layer_sweep},
                                                                {"selectivity.csv", &tables.selectivity},
                                                                {"percentile_sweep.csv", &tables.percentile_sweep},
                                                                {"ablation.csv", &tables.ablation}};
    for (const auto& [name, text] : files) {
        std::ofstream out(dir / name, std::ios::binary);
        out << *text;
        if (!out) {
            fail(ErrorKind::data, "io", "failed writing " + (dir / name).string());
        }
    }
}

std::vector<std::filesystem::path> run_pipeline(const PipelineConfig& config) {
    config.validate();
    const std::filesystem::path dir(config.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const char* name, const Json& doc) {
        write_json(dir / name, doc);
        written.push_back(dir / name);
    };

    const ToyTransformer model(toy_config_for(config.seed));

    // extract
    ActivationDataset dataset;
    if (config.activations.empty()) {
        dataset = make_planted_corpus(model, config.seed, config.n_samples).dataset;
        write_container(dataset, dir / "acts.aact");
        written.push_back(dir / "acts.aact");
    } else {
        dataset = read_container(config.activations);
    }
    const Workspace ws = make_workspace(std::move(dataset));

    // sweep-layers
    const auto sweep = sweep_layers(ws.dataset, ws.splits, config.lambda);
    const Probe& probe = sweep.last_token_probes.at(sweep.best_layer);
    std::vector<Json> plot_inputs;
    plot_inputs.push_back(layer_sweep_to_json(sweep, config.lambda, ws.model_config));
    emit("sweep.json", plot_inputs.back());
    emit("probe.json", probe_to_json(probe, ws.model_config));

    // hnodes
    const HNodeConfig hn = fit_hnodes(ws, probe, config);
    const auto profiles = profile_hnodes(hn, probe, ws.dataset, ws.splits, std::min<std::size_t>(10, hn.k));
    emit("hnodes.json", hnode_config_to_json(hn, config.k, ws.model_config, profiles));

    // cancel
    const auto cancel = run_cancel_stage(ws, probe, hn);
    plot_inputs.push_back(cancellation_to_json(cancel.reports, &cancel.iti, ws.model_config));
    emit("cancellation.json", plot_inputs.back());

    // sweep-pct
    const EvalSet eval = make_eval_set(ws.dataset, ws.splits, hn.layer);
    const auto points =
        sweep_percentiles(eval, probe, hn, grounded_cancel_features(ws.dataset, ws.splits, hn.layer));
    plot_inputs.push_back(percentile_sweep_to_json(points, ws.model_config));
    emit("percentile_sweep.json", plot_inputs.back());

    // ablate
    plot_inputs.push_back(ablation_to_json(ablate_static_vs_adaptive(eval, probe, hn), ws.model_config));
    emit("ablation.json", plot_inputs.back());

    // generate + report
    if (toy_model_matches(ws.dataset, config.seed)) {
        const HookSpec hook = make_hook_spec(ws, probe, hn, HookMode::adaptive);
        std::vector<GenerationTrace> traces;
        for (const auto& prompt : dataset_prompts(ws.dataset, config.gen_prompts)) {
            traces.push_back(generate(model, prompt, config.max_new_tokens, &hook));
        }
        emit("generation.json", generation_to_json(traces, &hook, config.max_new_tokens, ws.model_config));
        emit("report_gen.json", gen_report(model, ws, probe, hn, config));
        emit("report_capability.json", capability_report(model, ws, probe, hn, config));
    }
    emit("report_downstream.json", downstream_report(ws, probe, hn, config));

    // plot-data
    write_plot_data(emit_plot_data(plot_inputs), dir);
    for (const char* name : {"layer_sweep.csv", "selectivity.csv", "percentile_sweep.csv", "ablation.csv"}) {
        written.push_back(dir / name);
    }
    return written;
}

} // namespace aac
