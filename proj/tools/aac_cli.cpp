#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aac/anc.hpp"
#include "aac/kernels.hpp"
#include "aac/pipeline.hpp"
#include "aac/planted.hpp"
#include "aac/schema.hpp"

using namespace aac;

namespace {

struct Overrides {
    std::uint64_t seed = 0;
    std::string config_file;
    int threads = 0;
    std::size_t k = 0;
    double alpha = 0, theta = 0, percentile = 0, lambda = 0;
    std::size_t max_new_tokens = 0, n_samples = 0;
    std::string activations, probe, hnodes, out_dir;

    std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> setters;

    template <typename T>
    void bind(CLI::App* app, const std::string& flag, T& slot, T PipelineConfig::*field, const std::string& help) {
        auto* opt = app->add_option(flag, slot, help);
        setters.emplace_back(opt, [&slot, field](PipelineConfig& c) { c.*field = slot; });
    }

    PipelineConfig resolve() const {
        PipelineConfig c = config_file.empty() ? PipelineConfig{} : load_config(config_file);
        for (const auto& [opt, set] : setters) {
            if (opt->count() > 0) {
                set(c);
            }
        }
        c.validate();
        return c;
    }
};

Workspace load_workspace(const PipelineConfig& c) {
    if (c.activations.empty()) {
        fail(ErrorKind::config, "missing_path", "--activations is required");
    }
    return make_workspace(read_container(c.activations));
}

Probe load_probe(const PipelineConfig& c) {
    if (c.probe.empty()) {
        fail(ErrorKind::config, "missing_path", "--probe is required");
    }
    return probe_from_json(read_json(c.probe));
}

HNodeConfig load_hnodes(const PipelineConfig& c, const Workspace& ws, const Probe& probe) {
    if (c.hnodes.empty()) {
        fail(ErrorKind::config, "missing_path", "--hnodes is required");
    }
    HNodeConfig hn = hnode_config_from_json(read_json(c.hnodes));
    hn.validate(ws.dataset.hidden_dim);
    if (hn.layer != probe.layer || probe.weights.size() != ws.dataset.hidden_dim) {
        fail(ErrorKind::config, "mismatched_inputs", "probe, H-Node config and activations disagree on layer or width");
    }
    return hn;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            fail(ErrorKind::config, "bad_list", "cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) {
        fail(ErrorKind::config, "bad_list", "empty number list");
    }
    return out;
}

std::vector<std::vector<int>> read_prompts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::data, "io", "cannot open prompt file " + path);
    }
    std::vector<std::vector<int>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            out.push_back(to_tokens(line));
        }
    }
    if (out.empty()) {
        fail(ErrorKind::data, "empty_prompts", "prompt file has no non-empty lines");
    }
    return out;
}

int report_error(const Error& e) {
    std::cerr << error_to_json(e).dump(2, ' ', false, Json::error_handler_t::replace) << '\n';
    return exit_code(e.kind());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive activation cancellation toolkit"};
    app.require_subcommand(1);
    Overrides o;
    auto* seed_opt = app.add_option("--seed", o.seed, "Seed for the toy model, corpus and splits");
    o.setters.emplace_back(seed_opt, [&o](PipelineConfig& c) { c.seed = o.seed; });
    app.add_option("--config", o.config_file, "JSON file with pipeline settings");
    app.add_option("--threads", o.threads, "OpenMP thread count (0 = runtime default)");

    auto add_common = [&](CLI::App* sub, bool paths) {
        if (paths) {
            o.bind(sub, "--activations", o.activations, &PipelineConfig::activations, "AACT container");
            o.bind(sub, "--probe", o.probe, &PipelineConfig::probe, "Probe document");
            o.bind(sub, "--hnodes", o.hnodes, &PipelineConfig::hnodes, "H-Node config document");
        }
    };
    auto add_hparams = [&](CLI::App* sub) {
        o.bind(sub, "--k", o.k, &PipelineConfig::k, "H-Nodes per sign");
        o.bind(sub, "--alpha", o.alpha, &PipelineConfig::alpha, "Attenuation strength");
        o.bind(sub, "--theta", o.theta, &PipelineConfig::theta, "Hook confidence threshold");
        o.bind(sub, "--pct", o.percentile, &PipelineConfig::percentile, "Grounded baseline percentile");
    };

    std::string out, corpus = "planted", pooling = "last_token", strategy = "all", pcts = "50,60,70,75,80,85,90,95,99";
    std::string hook_mode = "adaptive", prompt_file, suite, out_dir;
    std::size_t layer = 0, taps = 8, length = 30000, tail = 10000;
    double mu = 0.01, iti_alpha = 0.0;
    std::vector<std::string> report_files;

    auto* extract = app.add_subcommand("extract", "Build the planted corpus and write an AACT container");
    extract->add_option("--corpus", corpus, "Corpus name")->check(CLI::IsMember({"planted"}));
    o.bind(extract, "--n", o.n_samples, &PipelineConfig::n_samples, "Number of prompts");
    extract->add_option("--out", out, "Output .aact path")->required();

    auto* sweep = app.add_subcommand("sweep-layers", "Per-layer probe sweep");
    add_common(sweep, true);
    o.bind(sweep, "--lambda", o.lambda, &PipelineConfig::lambda, "L2 strength");
    std::string probe_out;
    sweep->add_option("--out", out, "Sweep document path")->required();
    sweep->add_option("--probe-out", probe_out, "Also write the best-layer probe here");

    auto* train = app.add_subcommand("train-probe", "Train one probe at a fixed layer");
    add_common(train, true);
    o.bind(train, "--lambda", o.lambda, &PipelineConfig::lambda, "L2 strength");
    train->add_option("--layer", layer, "Layer index")->required();
    train->add_option("--pooling", pooling, "last_token or mean")->check(CLI::IsMember({"last_token", "mean"}));
    train->add_option("--out", out, "Probe document path")->required();

    auto* hnodes = app.add_subcommand("hnodes", "Select H-Nodes and fit grounded baselines");
    add_common(hnodes, true);
    add_hparams(hnodes);
    hnodes->add_option("--out", out, "H-Node document path")->required();

    auto* cancel = app.add_subcommand("cancel", "Evaluate cancellation strategies on the eval split");
    add_common(cancel, true);
    add_hparams(cancel);
    cancel->add_option("--strategy", strategy, "Strategy name or 'all'");
    cancel->add_option("--iti-alpha", iti_alpha, "ITI strength (default: sweep 5,10,15,20,30)");
    cancel->add_option("--out", out, "Report path")->required();

    auto* sweep_pct = app.add_subcommand("sweep-pct", "Percentile baseline sweep");
    add_common(sweep_pct, true);
    sweep_pct->add_option("--pcts", pcts, "Comma-separated percentiles");
    sweep_pct->add_option("--out", out, "Report path")->required();

    auto* ablate = app.add_subcommand("ablate", "Static vs adaptive attenuation");
    add_common(ablate, true);
    ablate->add_option("--out", out, "Report path")->required();

    auto* gen = app.add_subcommand("generate", "Greedy generation with the real-time hook");
    add_common(gen, true);
    add_hparams(gen);
    gen->add_option("--hook", hook_mode, "adaptive, static, iti or off");
    gen->add_option("--prompt-file", prompt_file, "One prompt per line")->required();
    o.bind(gen, "--max-new-tokens", o.max_new_tokens, &PipelineConfig::max_new_tokens, "Tokens per prompt");
    gen->add_option("--iti-alpha", iti_alpha, "ITI strength for --hook iti");
    gen->add_option("--trace", out, "Trace document path")->required();

    auto* anc = app.add_subcommand("anc-demo", "LMS noise-canceller benchmark");
    anc->add_option("--taps", taps, "Tap-delay-line length");
    anc->add_option("--mu", mu, "LMS step size");
    anc->add_option("--length", length, "Benchmark length");
    anc->add_option("--tail", tail, "Samples used to measure residual noise");
    anc->add_option("--out", out, "Metrics path")->required();

    auto* report = app.add_subcommand("report", "Evaluation report suite");
    add_common(report, true);
    report->add_option("--suite", suite, "gen, downstream or capability")
        ->required()
        ->check(CLI::IsMember({"gen", "downstream", "capability"}));
    report->add_option("--out", out, "Report path")->required();

    auto* plot = app.add_subcommand("plot-data", "Tidy CSV tables from report documents");
    plot->add_option("--reports", report_files, "Report documents");
    plot->add_option("--out-dir", out_dir, "Directory for the CSV files")->required();

    auto* run = app.add_subcommand("run", "Full pipeline");
    o.bind(run, "--activations", o.activations, &PipelineConfig::activations, "Use this AACT container");
    add_hparams(run);
    o.bind(run, "--lambda", o.lambda, &PipelineConfig::lambda, "L2 strength");
    o.bind(run, "--n", o.n_samples, &PipelineConfig::n_samples, "Planted corpus size");
    o.bind(run, "--max-new-tokens", o.max_new_tokens, &PipelineConfig::max_new_tokens, "Tokens per prompt");
    o.bind(run, "--out-dir", o.out_dir, &PipelineConfig::out_dir, "Artifact directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error(Error(ErrorKind::config, "usage", e.what()));
    }

    try {
        if (o.threads > 0) {
            kernels::set_threads(o.threads);
        }
        const PipelineConfig pc = o.resolve();

        if (*extract) {
            const ToyTransformer model(toy_config_for(pc.seed));
            write_container(make_planted_corpus(model, pc.seed, pc.n_samples).dataset, out);
        } else if (*sweep) {
            const Workspace ws = load_workspace(pc);
            const auto result = sweep_layers(ws.dataset, ws.splits, pc.lambda);
            write_json(out, layer_sweep_to_json(result, pc.lambda, ws.model_config));
            if (!probe_out.empty()) {
                write_json(probe_out, probe_to_json(result.last_token_probes.at(result.best_layer), ws.model_config));
            }
        } else if (*train) {
            const Workspace ws = load_workspace(pc);
            const Pooling p = pooling == "mean" ? Pooling::mean : Pooling::last_token;
            write_json(out, probe_to_json(train_layer_probe(ws, layer, p, pc.lambda), ws.model_config));
        } else if (*hnodes) {
            const Workspace ws = load_workspace(pc);
            const Probe probe = load_probe(pc);
            if (probe.weights.size() != ws.dataset.hidden_dim || probe.layer >= ws.dataset.layer_count) {
                fail(ErrorKind::config, "mismatched_inputs", "probe does not fit the activations");
            }
            const HNodeConfig hn = fit_hnodes(ws, probe, pc);
            const auto profiles = profile_hnodes(hn, probe, ws.dataset, ws.splits, std::min<std::size_t>(10, hn.k));
            write_json(out, hnode_config_to_json(hn, pc.k, ws.model_config, profiles));
        } else if (*cancel) {
            std::vector<Strategy> chosen;
            if (strategy == "all") {
                chosen = post_hoc_strategies();
                chosen.push_back(Strategy::hook);
                chosen.push_back(Strategy::iti);
            } else {
                chosen.push_back(parse_strategy(strategy));
            }
            const Workspace ws = load_workspace(pc);
            const Probe probe = load_probe(pc);
            HNodeConfig hn = load_hnodes(pc, ws, probe);
            if (cancel->count("--alpha") > 0) {
                hn.alpha = pc.alpha;
            }
            if (cancel->count("--theta") > 0) {
                hn.theta = pc.theta;
            }
            if (cancel->count("--pct") > 0) {
                hn = with_percentile(hn, grounded_cancel_features(ws.dataset, ws.splits, hn.layer), pc.percentile);
            }
            hn.validate(ws.dataset.hidden_dim);
            const EvalSet eval = make_eval_set(ws.dataset, ws.splits, hn.layer);
            const auto direction = train_iti_direction(ws, hn.layer);
            std::vector<CancellationReport> reports;
            std::optional<ItiSweep> iti;
            for (Strategy s : chosen) {
                if (s == Strategy::iti && cancel->count("--iti-alpha") == 0) {
                    iti = sweep_iti(eval, probe, direction);
                    reports.push_back(iti->reports.at(iti->best));
                } else {
                    StrategyContext ctx{&probe, &hn, direction, iti_alpha > 0.0 ? iti_alpha : 10.0};
                    reports.push_back(evaluate_strategy(s, eval, ctx));
                }
            }
            write_json(out, cancellation_to_json(reports, iti ? &*iti : nullptr, ws.model_config));
        } else if (*sweep_pct) {
            const Workspace ws = load_workspace(pc);
            const Probe probe = load_probe(pc);
            const HNodeConfig hn = load_hnodes(pc, ws, probe);
            const auto grid = parse_list(pcts);
            const auto points = sweep_percentiles(make_eval_set(ws.dataset, ws.splits, hn.layer), probe, hn,
                                                  grounded_cancel_features(ws.dataset, ws.splits, hn.layer), grid);
            write_json(out, percentile_sweep_to_json(points, ws.model_config));
        } else if (*ablate) {
            const Workspace ws = load_workspace(pc);
            const Probe probe = load_probe(pc);
            const HNodeConfig hn = load_hnodes(pc, ws, probe);
            const auto result = ablate_static_vs_adaptive(make_eval_set(ws.dataset, ws.splits, hn.layer), probe, hn);
            write_json(out, ablation_to_json(result, ws.model_config));
        } else if (*gen) {
            const ToyTransformer model(toy_config_for(pc.seed));
            const auto prompts = read_prompts(prompt_file);
            const HookMode mode = parse_hook_mode(hook_mode);
            std::optional<HookSpec> spec;
            std::string label = "toy-transformer/seed=" + std::to_string(pc.seed);
            if (mode != HookMode::off || !pc.probe.empty()) {
                const Workspace ws = load_workspace(pc);
                const Probe probe = load_probe(pc);
                HNodeConfig hn = load_hnodes(pc, ws, probe);
                if (gen->count("--alpha") > 0) {
                    hn.alpha = pc.alpha;
                }
                if (gen->count("--theta") > 0) {
                    hn.theta = pc.theta;
                }
                hn.validate(ws.dataset.hidden_dim);
                spec = make_hook_spec(ws, probe, hn, mode, iti_alpha > 0.0 ? iti_alpha : 10.0);
                label = ws.model_config;
            }
            std::vector<GenerationTrace> traces;
            for (const auto& p : prompts) {
                traces.push_back(generate(model, p, pc.max_new_tokens, spec ? &*spec : nullptr));
            }
            write_json(out, generation_to_json(traces, spec ? &*spec : nullptr, pc.max_new_tokens, label));
        } else if (*anc) {
            if (taps < 1 || !(mu > 0.0) || length < 1 || tail < 1 || tail > length) {
                fail(ErrorKind::config, "bad_anc_args", "need taps >= 1, mu > 0 and 1 <= tail <= length");
            }
            const auto bench = make_anc_benchmark(length, pc.seed);
            const double bound = lms_stability_bound(taps, mean_power(bench.reference));
            const auto metrics = evaluate_anc(taps, mu, length, tail, pc.seed);
            write_json(out, anc_to_json(metrics, taps, mu, length, tail, pc.seed, bound));
            if (metrics.diverged) {
                fail(ErrorKind::numeric, "lms_diverged",
                     "LMS diverged: mu " + std::to_string(mu) + " exceeds the stability bound " + std::to_string(bound));
            }
        } else if (*report) {
            const Workspace ws = load_workspace(pc);
            const Probe probe = load_probe(pc);
            const HNodeConfig hn = load_hnodes(pc, ws, probe);
            if (suite == "downstream") {
                write_json(out, downstream_report(ws, probe, hn, pc));
            } else {
                const ToyTransformer model(toy_config_for(pc.seed));
                write_json(out, suite == "gen" ? gen_report(model, ws, probe, hn, pc)
                                               : capability_report(model, ws, probe, hn, pc));
            }
        } else if (*plot) {
            std::vector<Json> docs;
            for (const auto& f : report_files) {
                docs.push_back(read_json(f));
            }
            write_plot_data(emit_plot_data(docs), out_dir);
        } else if (*run) {
            for (const auto& path : run_pipeline(pc)) {
                std::cout << path.string() << '\n';
            }
        }
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
