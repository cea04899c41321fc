#include "untangle/classifier.hpp"
#include "untangle/cli.hpp"
#include "untangle/code_metrics.hpp"
#include "untangle/denoiser.hpp"
#include "untangle/embedding.hpp"
#include "untangle/error.hpp"
#include "untangle/eval_metrics.hpp"
#include "untangle/goldset.hpp"
#include "untangle/llm.hpp"
#include "untangle/mining.hpp"
#include "untangle/prompt.hpp"
#include "untangle/stat_tests.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace untangle;

namespace {

// Records cross the boundary as plain dicts, through the JSON wire format.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

std::vector<MethodChange> changes_from_py(const py::list& rows) {
    std::vector<MethodChange> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(method_change_from_json(from_py(row)));
    return out;
}

Label label_of(const std::string& text) {
    const auto l = parse_label(text);
    if (!l) throw Error(ErrorCode::InvalidLabel, "unknown label '" + text + "'");
    return *l;
}

std::vector<Label> labels_of(const std::vector<std::string>& texts) {
    std::vector<Label> out;
    for (const auto& t : texts) out.push_back(label_of(t));
    return out;
}

PromptVariant variant_of(const std::string& name) {
    const auto v = parse_variant(name);
    if (!v) throw Error(ErrorCode::InvalidArgument, "unknown prompt variant '" + name + "'");
    return *v;
}

ModelKind kind_of(const std::string& name) {
    const auto k = parse_model_kind(name);
    if (!k) throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + name + "'");
    return *k;
}

TrainConfig train_config(int hidden_units, double learning_rate, int epochs, int batch_size, std::uint64_t seed,
                         double l2) {
    TrainConfig cfg;
    cfg.hidden_units = hidden_units;
    cfg.learning_rate = learning_rate;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.l2 = l2;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "untangle core bindings";
    m.attr("__version__") = UNTANGLE_VERSION;

    // Messages start with the error code name, e.g. "InvalidLabel: ...".
    py::register_exception<Error>(m, "UntangleError", PyExc_ValueError);

    m.def(
        "mine",
        [](const std::string& repo, std::optional<std::vector<std::string>> rules) {
            MiningResult r;
            {
                py::gil_scoped_release release;
                r = mine_repository(repo, rules ? BugfixRules(*rules) : BugfixRules{});
            }
            json changes = json::array(), skipped = json::array();
            for (const auto& c : r.changes) changes.push_back(to_json(c));
            for (const auto& s : r.skipped)
                skipped.push_back({{"commit_id", s.commit_id}, {"file_path", s.file_path}, {"reason", s.reason}});
            return to_py(json{{"commits", r.commits.size()}, {"changes", changes}, {"skipped", skipped}});
        },
        py::arg("repo"), py::arg("rules") = py::none(),
        "Mine method-level changes from a git repository.");

    m.def(
        "gold_set",
        [](const py::list& changes, std::size_t cap, std::uint64_t seed, std::int64_t min_age_days,
           std::optional<std::int64_t> reference_time) {
            GoldsetOptions opts;
            opts.notbuggy_cap = cap;
            opts.seed = seed;
            opts.min_age_days = min_age_days;
            opts.reference_time = reference_time;
            json out = json::array();
            for (const auto& r : build_automated_goldset(changes_from_py(changes), opts)) out.push_back(to_json(r));
            return to_py(out);
        },
        py::arg("changes"), py::arg("cap") = 730, py::arg("seed") = 0, py::arg("min_age_days") = 730,
        py::arg("reference_time") = py::none());

    m.def(
        "cohens_kappa",
        [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
            return to_py(to_json(cohens_kappa(labels_of(a), labels_of(b))));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "render_prompt",
        [](const std::string& variant, const py::dict& change, std::size_t max_chars) {
            RenderOptions opts;
            opts.max_chars = max_chars;
            return render_prompt(variant_of(variant), method_change_from_json(from_py(change)), opts).text;
        },
        py::arg("variant"), py::arg("change"), py::arg("max_chars") = RenderOptions{}.max_chars);

    m.def(
        "parse_verdict",
        [](const std::string& raw, bool reasoning) {
            const auto v = parse_verdict(raw, reasoning);
            return py::make_tuple(std::string(to_string(v.label)), v.reasoning);
        },
        py::arg("raw"), py::arg("reasoning") = false);

    m.def(
        "classification_metrics",
        [](std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn) {
            return to_py(to_json(classification_metrics(ConfusionMatrix{tp, fp, fn, tn})));
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

    m.def(
        "rank_sum_test",
        [](const std::vector<double>& a, const std::vector<double>& b) { return to_py(to_json(rank_sum_test(a, b))); },
        py::arg("a"), py::arg("b"));

    m.def(
        "cliffs_delta",
        [](const std::vector<double>& a, const std::vector<double>& b) { return to_py(to_json(cliffs_delta(a, b))); },
        py::arg("a"), py::arg("b"));

    m.def(
        "code_metrics", [](const std::string& source) { return to_py(to_json(compute_metrics(source))); },
        py::arg("source"));

    m.def(
        "embed",
        [](const std::string& message, const std::string& diff, std::size_t token_limit) {
            EmbedConfig cfg;
            cfg.token_limit = token_limit;
            cfg.validate();
            return embed_change(message, diff, cfg).values;
        },
        py::arg("message"), py::arg("diff"), py::arg("token_limit") = 512,
        "Local 768-dimensional hashing embedding of diff and message.");

    m.def(
        "evaluate",
        [](const std::vector<std::vector<double>>& features, const std::vector<std::string>& labels,
           const std::string& protocol, const std::string& model, double train_fraction, int hidden_units,
           double learning_rate, int epochs, int batch_size, std::uint64_t seed, double l2) {
            if (features.size() != labels.size())
                throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
            std::vector<LabeledVector> items;
            for (std::size_t i = 0; i < features.size(); ++i)
                items.push_back({features[i], label_of(labels[i]), std::to_string(i)});
            const auto cfg = train_config(hidden_units, learning_rate, epochs, batch_size, seed, l2);
            cfg.validate();
            EvalReport r;
            {
                py::gil_scoped_release release;
                if (protocol == "loo")
                    r = evaluate_loo(items, cfg, kind_of(model));
                else if (protocol == "split")
                    r = evaluate_split(items, train_fraction, cfg, kind_of(model));
                else
                    throw Error(ErrorCode::InvalidArgument, "protocol must be split or loo");
            }
            return to_py(to_json(r));
        },
        py::arg("features"), py::arg("labels"), py::arg("protocol") = "split", py::arg("model") = "mlp",
        py::arg("train_fraction") = 0.8, py::arg("hidden_units") = 256, py::arg("learning_rate") = 0.001,
        py::arg("epochs") = 200, py::arg("batch_size") = 32, py::arg("seed") = 0, py::arg("l2") = 0.0001);

    m.def(
        "gradient_check",
        [](const std::string& model, const std::vector<double>& features, const std::string& label, int hidden_units,
           std::uint64_t seed, double l2) {
            const auto cfg = train_config(hidden_units, 0.001, 1, 1, seed, l2);
            return gradient_check(kind_of(model), features, label_of(label), cfg);
        },
        py::arg("model"), py::arg("features"), py::arg("label"), py::arg("hidden_units") = 16, py::arg("seed") = 0,
        py::arg("l2") = 0.0001);

    m.def(
        "denoise",
        [](const py::list& changes, const std::map<std::string, std::string>& verdicts, const std::string& project,
           std::int64_t min_age_days) {
            std::map<std::string, Label> known;
            for (const auto& [id, text] : verdicts) known[id] = parse_label(text).value_or(Label::Unparseable);
            const auto hs = build_histories(changes_from_py(changes), project);
            const auto ps = build_less_noisy(hs,
                                             batch_of([&known](const MethodChange& c) {
                                                 auto it = known.find(c.change_id);
                                                 return it == known.end() ? Label::Unparseable : it->second;
                                             }),
                                             min_age_days);
            return to_py(to_json(ps));
        },
        py::arg("changes"), py::arg("verdicts"), py::arg("project") = "", py::arg("min_age_days") = 730,
        "Noisy and Less-Noisy partitions from precomputed verdicts keyed by change_id.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
