#include "untangle/cli.hpp"

#include "untangle/annotation_server.hpp"
#include "untangle/annotation_store.hpp"
#include "untangle/classifier.hpp"
#include "untangle/code_metrics.hpp"
#include "untangle/denoiser.hpp"
#include "untangle/embedding.hpp"
#include "untangle/error.hpp"
#include "untangle/eval_metrics.hpp"
#include "untangle/goldset.hpp"
#include "untangle/hashing.hpp"
#include "untangle/llm.hpp"
#include "untangle/mining.hpp"
#include "untangle/prompt.hpp"
#include "untangle/stat_tests.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <pthread.h>
#include <thread>

#ifndef UNTANGLE_VERSION
#define UNTANGLE_VERSION "0.0.0"
#endif

namespace untangle::cli {

namespace fs = std::filesystem;

namespace {

struct ModelOpts {
    std::vector<std::string> models{"mock"};
    std::string responder;
    std::string base_url;
    std::string cache_dir;
    double temperature = 0.0;
    int max_tokens = 1024;
    int retries = 3;
    double timeout = 60.0;
    double rps = 2.0;
    int concurrency = 4;
    std::vector<std::string> variants{"diff-message"};
    std::string templates;
    std::size_t max_chars = 60000;
};

void add_model_options(CLI::App* sub, ModelOpts& o) {
    sub->add_option("--model", o.models, "provider[:model_id], e.g. mock, openai:gpt-4o, gemini:gemini-1.5-pro")
        ->capture_default_str();
    sub->add_option("--responder", o.responder, "mock responder JSONL {prompt_sha256, response}");
    sub->add_option("--base-url", o.base_url, "override the provider endpoint");
    sub->add_option("--cache", o.cache_dir, "response cache directory");
    sub->add_option("--temperature", o.temperature)->capture_default_str();
    sub->add_option("--max-output-tokens", o.max_tokens)->capture_default_str();
    sub->add_option("--retries", o.retries)->capture_default_str();
    sub->add_option("--timeout", o.timeout, "seconds per request")->capture_default_str();
    sub->add_option("--rps", o.rps, "requests per second; 0 disables the limiter")->capture_default_str();
    sub->add_option("--concurrency", o.concurrency)->capture_default_str();
    sub->add_option("--variant", o.variants, "diff-only, diff-message, fewshot, cot, fewshot-cot")
        ->capture_default_str();
    sub->add_option("--templates", o.templates, "directory overriding the built-in prompt templates");
    sub->add_option("--max-chars", o.max_chars, "prompt size limit")->capture_default_str();
}

ModelConfig model_config(const std::string& spec, const ModelOpts& o) {
    ModelConfig cfg;
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const auto provider = parse_provider(head);
    if (!provider) throw Error(ErrorCode::InvalidArgument, "unknown provider in model spec '" + spec + "'");
    cfg.provider = *provider;
    if (colon != std::string::npos) {
        cfg.model_id = spec.substr(colon + 1);
    } else if (cfg.provider == Provider::Mock) {
        cfg.model_id = "mock";
    } else {
        throw Error(ErrorCode::InvalidArgument, "model spec '" + spec + "' needs provider:model_id");
    }
    if (cfg.model_id.empty()) throw Error(ErrorCode::InvalidArgument, "empty model id in '" + spec + "'");
    cfg.temperature = o.temperature;
    cfg.max_output_tokens = o.max_tokens;
    cfg.max_retries = o.retries;
    cfg.timeout_seconds = o.timeout;
    cfg.requests_per_second = o.rps;
    cfg.concurrency = o.concurrency;
    cfg.base_url = o.base_url;
    if (!o.responder.empty()) cfg.responder = o.responder;
    cfg.validate();
    return cfg;
}

std::vector<PromptVariant> variants_of(const ModelOpts& o) {
    std::vector<PromptVariant> out;
    for (const auto& name : o.variants) {
        const auto v = parse_variant(name);
        if (!v) throw Error(ErrorCode::InvalidArgument, "unknown prompt variant '" + name + "'");
        out.push_back(*v);
    }
    return out;
}

std::optional<fs::path> optional_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
}

// <out>.manifest.json: options as parsed, input digests, tool version.
void write_manifest(const fs::path& out, const CLI::App& sub, const std::vector<fs::path>& inputs) {
    json config = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
        std::string name = opt->get_name();
        name.erase(0, name.find_first_not_of('-'));
        const auto& results = opt->results();
        if (!results.empty())
            config[name] = results.size() == 1 ? json(results.front()) : json(results);
        else if (!opt->get_default_str().empty())
            config[name] = opt->get_default_str();
    }
    json digests = json::object();
    for (const auto& p : inputs) {
        if (fs::is_regular_file(p))
            digests[p.string()] = sha256_file_hex(p);
        else if (fs::is_directory(p))
            digests[p.string()] = "directory";
    }
    const json manifest{{"tool", "untangle"},
                        {"version", UNTANGLE_VERSION},
                        {"subcommand", sub.get_name()},
                        {"config", config},
                        {"inputs", digests}};
    write_file(fs::path(out.string() + ".manifest.json"), manifest.dump(2) + "\n");
}

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::string project_for(const std::vector<std::string>& projects, const std::vector<std::string>& inputs,
                        std::size_t i) {
    if (!projects.empty()) {
        if (projects.size() != inputs.size())
            throw Error(ErrorCode::InvalidArgument, "--project must be given once per --in");
        return projects[i];
    }
    return fs::path(inputs[i]).stem().string();
}

std::vector<MethodHistory> load_histories(const std::vector<std::string>& inputs,
                                          const std::vector<std::string>& projects) {
    std::vector<MethodHistory> all;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto changes = read_method_changes(inputs[i]);
        auto h = build_histories(changes, project_for(projects, inputs, i));
        std::move(h.begin(), h.end(), std::back_inserter(all));
    }
    return all;
}

// Rows carrying "values" (embedding output) with a Buggy/NotBuggy label.
std::vector<LabeledVector> load_labeled_vectors(const fs::path& path) {
    std::vector<LabeledVector> out;
    for (const auto& row : read_jsonl(path)) {
        const auto label = parse_label(row.value("label", ""));
        const std::string id = row.value("change_id", "");
        if (!label || *label == Label::Unparseable)
            throw Error(ErrorCode::InvalidLabel, "embedding row " + id + " has no Buggy/NotBuggy label");
        LabeledVector v;
        v.features = embedding_from_json(row).values;
        v.label = *label;
        v.id = id;
        out.push_back(std::move(v));
    }
    if (out.empty()) throw Error(ErrorCode::EmptyInput, path.string() + " holds no embeddings");
    return out;
}

std::map<std::string, CodeMetrics> load_metrics(const std::vector<std::string>& files) {
    std::map<std::string, CodeMetrics> out;
    for (const auto& f : files)
        for (auto& row : parse_metrics_csv(read_file(f))) out[row.method_id] = row.metrics;
    return out;
}

// --- subcommands -----------------------------------------------------------------

struct MineOpts {
    std::string repo, out, rules, commits_out, skipped_out;
};

int do_mine(const MineOpts& o, const CLI::App& sub, std::ostream& out) {
    const BugfixRules rules = o.rules.empty() ? BugfixRules{} : BugfixRules::from_file(o.rules);
    const auto result = mine_repository(o.repo, rules);
    std::string text;
    for (const auto& c : result.changes) text += to_json(c).dump() + '\n';
    write_file(o.out, text);
    if (!o.commits_out.empty()) {
        std::string rows;
        for (const auto& c : result.commits)
            rows += json{{"commit_id", c.commit_id},
                         {"message", c.message},
                         {"author", c.author},
                         {"timestamp", c.timestamp},
                         {"is_bugfix", c.is_bugfix},
                         {"files_touched", c.files_touched},
                         {"parent_id", c.parent_id}}
                        .dump() +
                    '\n';
        write_file(o.commits_out, rows);
    }
    if (!o.skipped_out.empty()) {
        std::string rows;
        for (const auto& s : result.skipped)
            rows += json{{"commit_id", s.commit_id}, {"file_path", s.file_path}, {"reason", s.reason}}.dump() + '\n';
        write_file(o.skipped_out, rows);
    }
    std::vector<fs::path> inputs;
    if (!o.rules.empty()) inputs.emplace_back(o.rules);
    write_manifest(o.out, sub, inputs);
    out << json{{"commits", result.commits.size()},
                {"changes", result.changes.size()},
                {"skipped", result.skipped.size()}}
               .dump()
        << '\n';
    return 0;
}

struct GoldsetOpts {
    std::string in, out, format, annotations, rater_a, rater_b;
    std::size_t cap = 730;
    std::uint64_t seed = 0;
    std::int64_t min_age_days = 730;
    std::optional<std::int64_t> reference_time;
};

int do_goldset(const GoldsetOpts& o, const CLI::App& sub, std::ostream& out) {
    const auto changes = read_method_changes(o.in);
    GoldsetOptions g;
    g.notbuggy_cap = o.cap;
    g.seed = o.seed;
    g.min_age_days = o.min_age_days;
    g.reference_time = o.reference_time;
    auto records = build_automated_goldset(changes, g);

    std::vector<fs::path> inputs{o.in};
    if (!o.annotations.empty()) {
        inputs.emplace_back(fs::path(o.annotations) / "labels.jsonl");
        AnnotationStore store(o.annotations, changes);
        // Human labels replace automated ones for the same change.
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < records.size(); ++i) pos[records[i].change.change_id] = i;
        for (auto& r : store.resolved()) {
            auto it = pos.find(r.change.change_id);
            if (it != pos.end())
                records[it->second] = std::move(r);
            else
                records.push_back(std::move(r));
        }
        if (!o.rater_a.empty() && !o.rater_b.empty())
            out << json{{"kappa", to_json(store.kappa(o.rater_a, o.rater_b))}}.dump() << '\n';
    }

    std::string format = o.format;
    if (format.empty()) format = fs::path(o.out).extension() == ".csv" ? "csv" : "jsonl";
    const ExportFormat fmt = format == "csv" ? ExportFormat::Csv : ExportFormat::Jsonl;
    const std::string digest = export_dataset(records, o.out, fmt);
    write_manifest(o.out, sub, inputs);
    std::size_t buggy = 0;
    for (const auto& r : records) buggy += r.label == Label::Buggy;
    out << json{{"records", records.size()}, {"buggy", buggy}, {"notbuggy", records.size() - buggy}, {"sha256", digest}}
               .dump()
        << '\n';
    return 0;
}

struct ServeOpts {
    std::string queue, store, host = "127.0.0.1", static_dir;
    int port = 8080;
};

int do_serve(const ServeOpts& o, std::ostream& out) {
    AnnotationStore store(o.store, read_method_changes(o.queue));
    AnnotationServer server(store, optional_path(o.static_dir));

    // SIGINT/SIGTERM stop the listener from a watcher thread.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::thread watcher([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });

    int port = o.port;
    bool ok;
    if (port == 0) {
        port = server.bind_to_any_port(o.host);
        out << "listening on http://" << o.host << ':' << port << std::endl;
        ok = port > 0 && server.listen_after_bind();
    } else {
        out << "listening on http://" << o.host << ':' << port << std::endl;
        ok = server.listen(o.host, port);
    }
    if (!ok) {
        pthread_kill(watcher.native_handle(), SIGTERM);
        watcher.join();
        pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
        throw Error(ErrorCode::IoFailure, "cannot listen on " + o.host + ':' + std::to_string(o.port));
    }
    watcher.join();
    pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
    store.write_snapshot();
    return 0;
}

struct ClassifyOpts {
    std::string in, out, metrics_out;
    ModelOpts model;
};

int do_classify(const ClassifyOpts& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    const auto records = read_labeled_changes(o.in);
    if (records.empty()) throw Error(ErrorCode::EmptyInput, o.in + " holds no labeled changes");
    const auto variants = variants_of(o.model);
    std::vector<ModelConfig> configs;
    for (const auto& spec : o.model.models) configs.push_back(model_config(spec, o.model));

    std::optional<PromptTemplates> templates;
    if (!o.model.templates.empty()) templates = PromptTemplates::from_directory(o.model.templates);
    RenderOptions render;
    render.max_chars = o.model.max_chars;
    render.templates = templates ? &*templates : nullptr;

    ResponseCache cache(optional_path(o.model.cache_dir));
    std::vector<Label> truths;
    for (const auto& r : records) truths.push_back(r.label);

    json runs = json::array();
    std::string rows;
    for (const auto& cfg : configs) {
        Gateway gateway(cfg, cache);
        for (const auto variant : variants) {
            std::vector<PromptText> prompts;
            std::vector<std::size_t> slots;
            std::vector<Verdict> verdicts(records.size());
            for (std::size_t i = 0; i < records.size(); ++i) {
                try {
                    prompts.push_back(render_prompt(variant, records[i].change, render));
                    slots.push_back(i);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::MissingMessage && e.code() != ErrorCode::PromptTooLarge) throw;
                    err << "untangle: " << records[i].change.change_id << ": " << e.what() << '\n';
                    verdicts[i].provider = cfg.provider;
                    verdicts[i].model_id = cfg.model_id;
                    verdicts[i].variant = variant;
                }
            }
            const std::size_t before = gateway.request_count();
            const auto answered = gateway.classify_batch(prompts);
            for (std::size_t k = 0; k < slots.size(); ++k) verdicts[slots[k]] = answered[k];
            err << "untangle: " << to_string(cfg.provider) << ':' << cfg.model_id << ' ' << to_string(variant)
                << ": " << gateway.request_count() - before << " requests, "
                << prompts.size() - (gateway.request_count() - before) << " cache hits\n";

            std::vector<Label> preds;
            for (std::size_t i = 0; i < records.size(); ++i) {
                preds.push_back(verdicts[i].label);
                json row = to_json(verdicts[i]);
                row["change_id"] = records[i].change.change_id;
                row["truth"] = std::string(to_string(records[i].label));
                rows += row.dump() + '\n';
            }
            const auto scored = score_predictions(preds, truths);
            runs.push_back({{"model", std::string(to_string(cfg.provider)) + ':' + cfg.model_id},
                            {"variant", std::string(to_string(variant))},
                            {"n", records.size()},
                            {"metrics", to_json(scored.metrics)},
                            {"confusion", to_json(scored.matrix)}});
        }
    }
    const json result{{"runs", runs}};
    std::vector<fs::path> inputs{o.in};
    if (!o.model.responder.empty()) inputs.emplace_back(o.model.responder);
    if (!o.out.empty()) {
        write_file(o.out, rows);
        write_manifest(o.out, sub, inputs);
    }
    if (!o.metrics_out.empty()) {
        write_file(o.metrics_out, result.dump(2) + '\n');
        write_manifest(o.metrics_out, sub, inputs);
    }
    out << result.dump(2) << '\n';
    return 0;
}

struct EmbedOpts {
    std::string in, out, provider = "local", model_id, base_url, cache;
    std::size_t token_limit = 512;
    int retries = 3;
    double timeout = 60.0;
};

int do_embed(const EmbedOpts& o, const CLI::App& sub, std::ostream& out) {
    EmbedConfig cfg;
    cfg.token_limit = o.token_limit;
    cfg.max_retries = o.retries;
    cfg.timeout_seconds = o.timeout;
    cfg.base_url = o.base_url;
    if (o.provider == "local" || o.provider == "mock") {
        cfg.provider = EmbedProvider::LocalMock;
    } else {
        const auto backend = parse_provider(o.provider);
        if (!backend || *backend == Provider::Mock)
            throw Error(ErrorCode::InvalidArgument, "unknown embedding provider '" + o.provider + "'");
        cfg.provider = EmbedProvider::Remote;
        cfg.backend = *backend;
        cfg.model_id = "text-embedding";
    }
    if (!o.model_id.empty()) cfg.model_id = o.model_id;
    cfg.validate();

    EmbeddingCache cache(optional_path(o.cache));
    const TextEncoder encoder = cfg.provider == EmbedProvider::Remote ? make_remote_encoder(cfg) : TextEncoder{};
    std::string text;
    std::size_t n = 0;
    for (const auto& row : read_jsonl(o.in)) {
        const auto change = method_change_from_json(row);
        auto vec = embed_change(change.commit.message, change.diff_text, cfg, encoder, &cache);
        json line = to_json(vec);
        line["change_id"] = change.change_id;
        if (row.contains("label") && row["label"].is_string()) line["label"] = row["label"];
        text += line.dump() + '\n';
        ++n;
    }
    write_file(o.out, text);
    write_manifest(o.out, sub, {o.in});
    out << json{{"embeddings", n}, {"model_id", cfg.model_id}}.dump() << '\n';
    return 0;
}

struct TrainOpts {
    std::string in, out, model = "mlp";
    TrainConfig cfg;
    bool loo = false;
    double train_fraction = 0.8;
};

void add_train_options(CLI::App* sub, TrainOpts& o) {
    sub->add_option("--model", o.model, "mlp or logistic")->capture_default_str();
    sub->add_option("--hidden", o.cfg.hidden_units)->capture_default_str();
    sub->add_option("--lr", o.cfg.learning_rate)->capture_default_str();
    sub->add_option("--epochs", o.cfg.epochs)->capture_default_str();
    sub->add_option("--batch-size", o.cfg.batch_size)->capture_default_str();
    sub->add_option("--seed", o.cfg.seed)->capture_default_str();
    sub->add_option("--l2", o.cfg.l2)->capture_default_str();
}

ModelKind kind_of(const std::string& name) {
    const auto k = parse_model_kind(name);
    if (!k) throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + name + "'");
    return *k;
}

int do_train(const TrainOpts& o, const CLI::App& sub, std::ostream& out) {
    o.cfg.validate();
    const auto items = load_labeled_vectors(o.in);
    const auto model = train(items, o.cfg, kind_of(o.model));
    save_model(model, o.out);
    write_manifest(o.out, sub, {o.in});
    out << json{{"model", std::string(to_string(model.kind))},
                {"feature_dim", model.feature_dim},
                {"parameters", model.param_count()},
                {"train_items", items.size()}}
               .dump()
        << '\n';
    return 0;
}

int do_eval(const TrainOpts& o, const CLI::App& sub, std::ostream& out) {
    o.cfg.validate();
    const auto items = load_labeled_vectors(o.in);
    const auto report = o.loo ? evaluate_loo(items, o.cfg, kind_of(o.model))
                              : evaluate_split(items, o.train_fraction, o.cfg, kind_of(o.model));
    const json doc = to_json(report);
    if (!o.out.empty()) {
        write_file(o.out, doc.dump(2) + '\n');
        write_manifest(o.out, sub, {o.in});
    }
    out << doc.dump(2) << '\n';
    return 0;
}

struct DenoiseOpts {
    std::vector<std::string> in, projects;
    std::string out, verdicts;
    std::int64_t min_age_days = 730;
    ModelOpts model;
};

int do_denoise(const DenoiseOpts& o, const CLI::App& sub, std::ostream& out) {
    const auto histories = load_histories(o.in, o.projects);
    std::vector<fs::path> inputs = as_paths(o.in);

    PartitionSet ps;
    if (!o.verdicts.empty()) {
        // Precomputed verdict rows (e.g. classify-llm output); later rows win.
        inputs.emplace_back(o.verdicts);
        std::map<std::string, Label> known;
        for (const auto& row : read_jsonl(o.verdicts)) {
            const auto label = parse_label(row.value("label", ""));
            known[row.value("change_id", "")] = label.value_or(Label::Unparseable);
        }
        const auto fn = batch_of([&known](const MethodChange& c) {
            auto it = known.find(c.change_id);
            return it == known.end() ? Label::Unparseable : it->second;
        });
        ps = build_less_noisy(histories, fn, o.min_age_days);
    } else {
        if (o.model.models.size() != 1 || o.model.variants.size() != 1)
            throw Error(ErrorCode::InvalidArgument, "denoise takes exactly one --model and one --variant");
        const auto variants = variants_of(o.model);
        std::optional<PromptTemplates> templates;
        if (!o.model.templates.empty()) templates = PromptTemplates::from_directory(o.model.templates);
        RenderOptions render;
        render.max_chars = o.model.max_chars;
        render.templates = templates ? &*templates : nullptr;
        ResponseCache cache(optional_path(o.model.cache_dir));
        Gateway gateway(model_config(o.model.models.front(), o.model), cache);
        if (!o.model.responder.empty()) inputs.emplace_back(o.model.responder);
        ps = build_less_noisy(histories, gateway_verdicts(gateway, variants.front(), render), o.min_age_days);
    }
    write_file(o.out, to_json(ps).dump(2) + '\n');
    write_manifest(o.out, sub, inputs);
    out << json{{"noisy_buggy", ps.noisy_buggy.size()},
                {"noisy_notbuggy", ps.noisy_notbuggy.size()},
                {"less_noisy_buggy", ps.less_noisy_buggy.size()},
                {"less_noisy_notbuggy", ps.less_noisy_notbuggy.size()},
                {"quarantined", ps.quarantined.size()},
                {"verdict_queries", ps.verdict_queries}}
               .dump()
        << '\n';
    return 0;
}

struct MetricsOpts {
    std::vector<std::string> in, projects;
    std::string out;
};

int do_metrics(const MetricsOpts& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    const auto histories = load_histories(o.in, o.projects);
    std::vector<MetricsRow> rows;
    std::size_t failed = 0;
    for (const auto& h : histories) {
        try {
            rows.push_back({h.method_id, h.project, compute_metrics(h.first_version_source)});
        } catch (const Error& e) {
            ++failed;
            err << "untangle: " << h.method_id << ": " << e.what() << '\n';
        }
    }
    write_file(o.out, metrics_csv(rows));
    write_manifest(o.out, sub, as_paths(o.in));
    out << json{{"methods", rows.size()}, {"failed", failed}}.dump() << '\n';
    return 0;
}

struct StatsOpts {
    std::string a, b, out;
    std::vector<std::string> metrics;
};

int do_stats(const StatsOpts& o, const CLI::App& sub, std::ostream& out) {
    const auto a = parse_metrics_csv(read_file(o.a));
    const auto b = parse_metrics_csv(read_file(o.b));
    if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "both metric files need at least one row");
    std::vector<std::string> names = o.metrics;
    if (names.empty()) names.assign(kMetricNames.begin(), kMetricNames.end());
    json doc = json::object();
    for (const auto& name : names) {
        std::vector<double> xa, xb;
        for (const auto& r : a) xa.push_back(metric_value(r.metrics, name));
        for (const auto& r : b) xb.push_back(metric_value(r.metrics, name));
        const auto test = rank_sum_test(xa, xb);
        const auto effect = cliffs_delta(xa, xb);
        json entry = to_json(test);
        entry["delta"] = effect.delta;
        entry["category"] = std::string(to_string(effect.category));
        doc[name] = entry;
    }
    if (!o.out.empty()) {
        write_file(o.out, doc.dump(2) + '\n');
        write_manifest(o.out, sub, {o.a, o.b});
    }
    out << doc.dump(2) << '\n';
    return 0;
}

struct ReportOpts {
    std::string partitions, out, aggregate;
    std::vector<std::string> metrics;
};

int do_report(const ReportOpts& o, const CLI::App& sub, std::ostream& out) {
    const auto ps = partition_set_from_json(json::parse(read_file(o.partitions)));
    const auto report = separability_report(ps, load_metrics(o.metrics));
    std::vector<fs::path> inputs{o.partitions};
    for (const auto& m : o.metrics) inputs.emplace_back(m);
    write_file(o.out, report_csv(report));
    write_manifest(o.out, sub, inputs);
    if (!o.aggregate.empty()) {
        write_file(o.aggregate, aggregate_csv(report));
        write_manifest(o.aggregate, sub, inputs);
    }
    out << json{{"rows", report.rows.size()}, {"excluded", report.excluded}}.dump() << '\n';
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Untangle method-level changes in bug-fix commits and build denoised bug datasets.", "untangle"};
    app.set_version_flag("--version", UNTANGLE_VERSION);
    app.set_config("--config", "", "key = value file overriding defaults (sections per subcommand)");
    app.require_subcommand(1);
    app.fallthrough();

    MineOpts mine_o;
    auto* mine = app.add_subcommand("mine", "Extract method-level changes from a git repository");
    mine->add_option("--repo", mine_o.repo, "repository path")->required();
    mine->add_option("--out", mine_o.out, "changes JSONL")->required();
    mine->add_option("--rules", mine_o.rules, "bug-fix regex file, one pattern per line")->check(CLI::ExistingFile);
    mine->add_option("--commits-out", mine_o.commits_out, "commit records JSONL");
    mine->add_option("--skipped-out", mine_o.skipped_out, "skip report JSONL");

    GoldsetOpts gold_o;
    auto* gold = app.add_subcommand("goldset", "Build the automated gold set, merged with human labels");
    gold->add_option("--in", gold_o.in, "changes JSONL")->required()->check(CLI::ExistingFile);
    gold->add_option("--out", gold_o.out, "gold set (.jsonl or .csv)")->required();
    gold->add_option("--format", gold_o.format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
    gold->add_option("--cap", gold_o.cap, "NotBuggy sample size")->capture_default_str();
    gold->add_option("--seed", gold_o.seed)->capture_default_str();
    gold->add_option("--min-age-days", gold_o.min_age_days)->capture_default_str();
    gold->add_option("--reference-time", gold_o.reference_time, "unix seconds; default latest commit");
    gold->add_option("--annotations", gold_o.annotations, "annotation store directory")->check(CLI::ExistingDirectory);
    gold->add_option("--rater-a", gold_o.rater_a);
    gold->add_option("--rater-b", gold_o.rater_b);

    ServeOpts serve_o;
    auto* serve = app.add_subcommand("serve", "Serve the annotation API and static UI");
    serve->add_option("--queue", serve_o.queue, "changes JSONL to annotate")->required()->check(CLI::ExistingFile);
    serve->add_option("--store", serve_o.store, "annotation store directory")->required();
    serve->add_option("--host", serve_o.host)->capture_default_str();
    serve->add_option("--port", serve_o.port, "0 picks a free port")->capture_default_str();
    serve->add_option("--static", serve_o.static_dir, "UI build directory")->check(CLI::ExistingDirectory);

    ClassifyOpts cls_o;
    auto* cls = app.add_subcommand("classify-llm", "Classify a labeled dataset with each variant and model");
    cls->add_option("--in", cls_o.in, "gold set JSONL")->required()->check(CLI::ExistingFile);
    cls->add_option("--out", cls_o.out, "verdicts JSONL");
    cls->add_option("--metrics-out", cls_o.metrics_out, "metrics JSON");
    add_model_options(cls, cls_o.model);

    EmbedOpts emb_o;
    auto* emb = app.add_subcommand("embed", "Embed diff and message of each change");
    emb->add_option("--in", emb_o.in, "changes or gold set JSONL")->required()->check(CLI::ExistingFile);
    emb->add_option("--out", emb_o.out, "embeddings JSONL")->required();
    emb->add_option("--provider", emb_o.provider, "local, gemini or openai")->capture_default_str();
    emb->add_option("--model-id", emb_o.model_id);
    emb->add_option("--base-url", emb_o.base_url);
    emb->add_option("--token-limit", emb_o.token_limit)->capture_default_str();
    emb->add_option("--retries", emb_o.retries)->capture_default_str();
    emb->add_option("--timeout", emb_o.timeout)->capture_default_str();
    emb->add_option("--cache", emb_o.cache, "embedding cache JSONL");

    TrainOpts train_o;
    auto* trn = app.add_subcommand("train", "Train a classifier on labeled embeddings");
    trn->add_option("--in", train_o.in, "labeled embeddings JSONL")->required()->check(CLI::ExistingFile);
    trn->add_option("--out", train_o.out, "model JSON")->required();
    add_train_options(trn, train_o);

    TrainOpts eval_o;
    auto* evl = app.add_subcommand("eval", "Evaluate a classifier by split or leave-one-out");
    evl->add_option("--in", eval_o.in, "labeled embeddings JSONL")->required()->check(CLI::ExistingFile);
    evl->add_option("--out", eval_o.out, "report JSON");
    evl->add_flag("--loo", eval_o.loo, "leave-one-out instead of a stratified split");
    evl->add_option("--train-fraction", eval_o.train_fraction)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    add_train_options(evl, eval_o);

    DenoiseOpts den_o;
    auto* den = app.add_subcommand("denoise", "Build Noisy and Less-Noisy method partitions");
    den->add_option("--in", den_o.in, "changes JSONL, one per project")->required()->check(CLI::ExistingFile);
    den->add_option("--project", den_o.projects, "project name per --in (default: file stem)");
    den->add_option("--out", den_o.out, "partitions JSON")->required();
    den->add_option("--verdicts", den_o.verdicts, "precomputed verdicts JSONL instead of querying a model")
        ->check(CLI::ExistingFile);
    den->add_option("--min-age-days", den_o.min_age_days)->capture_default_str();
    add_model_options(den, den_o.model);

    MetricsOpts met_o;
    auto* met = app.add_subcommand("metrics", "Code metrics of each method's first version");
    met->add_option("--in", met_o.in, "changes JSONL, one per project")->required()->check(CLI::ExistingFile);
    met->add_option("--project", met_o.projects, "project name per --in (default: file stem)");
    met->add_option("--out", met_o.out, "metrics CSV")->required();

    StatsOpts st_o;
    auto* st = app.add_subcommand("stats", "Rank-sum test and Cliff's delta between two metric files");
    st->add_option("--a", st_o.a, "metrics CSV (e.g. Buggy)")->required()->check(CLI::ExistingFile);
    st->add_option("--b", st_o.b, "metrics CSV (e.g. NotBuggy)")->required()->check(CLI::ExistingFile);
    st->add_option("--metric", st_o.metrics, "restrict to these metrics");
    st->add_option("--out", st_o.out, "result JSON");

    ReportOpts rep_o;
    auto* rep = app.add_subcommand("report", "Separability report over partitions and metrics");
    rep->add_option("--partitions", rep_o.partitions, "partitions JSON")->required()->check(CLI::ExistingFile);
    rep->add_option("--metrics", rep_o.metrics, "metrics CSV files")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", rep_o.out, "report CSV")->required();
    rep->add_option("--aggregate", rep_o.aggregate, "category percentage CSV");

    const auto failing_help = [&]() -> std::string {
        for (const CLI::App* s : app.get_subcommands()) return s->help();
        return app.help();
    };

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << failing_help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << UNTANGLE_VERSION << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "untangle: " << e.what() << "\n\n" << failing_help();
        return 1;
    }

    try {
        if (*mine) return do_mine(mine_o, *mine, out);
        if (*gold) return do_goldset(gold_o, *gold, out);
        if (*serve) return do_serve(serve_o, out);
        if (*cls) return do_classify(cls_o, *cls, out, err);
        if (*emb) return do_embed(emb_o, *emb, out);
        if (*trn) return do_train(train_o, *trn, out);
        if (*evl) return do_eval(eval_o, *evl, out);
        if (*den) return do_denoise(den_o, *den, out);
        if (*met) return do_metrics(met_o, *met, out, err);
        if (*st) return do_stats(st_o, *st, out);
        if (*rep) return do_report(rep_o, *rep, out);
    } catch (const Error& e) {
        err << "untangle: " << e.what() << '\n';
        return is_validation_error(e.code()) ? 1 : 2;
    } catch (const json::exception& e) {
        err << "untangle: ParseFailure: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "untangle: " << e.what() << '\n';
        return 2;
    }
    err << app.help();
    return 1;
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace untangle::cli
