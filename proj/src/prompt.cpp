#include "untangle/prompt.hpp"

#include "untangle/error.hpp"
#include "untangle/io.hpp"

#include <functional>

namespace untangle {

std::string_view to_string(PromptVariant variant) noexcept {
    switch (variant) {
        case PromptVariant::DiffOnly: return "diff-only";
        case PromptVariant::DiffMessage: return "diff-message";
        case PromptVariant::FewShot: return "fewshot";
        case PromptVariant::ChainOfThought: return "cot";
        case PromptVariant::FewShotCoT: return "fewshot-cot";
    }
    return "diff-message";
}

std::optional<PromptVariant> parse_variant(std::string_view name) noexcept {
    const std::string n = to_lower(name);
    for (auto v : kAllVariants)
        if (n == to_string(v)) return v;
    if (n == "diffonly") return PromptVariant::DiffOnly;
    if (n == "diff+message" || n == "diffmessage") return PromptVariant::DiffMessage;
    if (n == "few-shot") return PromptVariant::FewShot;
    if (n == "chain-of-thought") return PromptVariant::ChainOfThought;
    if (n == "few-shot-cot" || n == "hybrid") return PromptVariant::FewShotCoT;
    return std::nullopt;
}

bool uses_examples(PromptVariant v) noexcept { return v == PromptVariant::FewShot || v == PromptVariant::FewShotCoT; }

bool expects_reasoning(PromptVariant v) noexcept {
    return v == PromptVariant::ChainOfThought || v == PromptVariant::FewShotCoT;
}

bool uses_message(PromptVariant v) noexcept { return v != PromptVariant::DiffOnly; }

namespace {

std::vector<std::string> nonblank_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = trim(text.substr(pos, end - pos));
        if (!line.empty()) out.push_back(std::move(line));
        pos = end + 1;
    }
    return out;
}

PromptTemplates load(const std::function<std::optional<std::string>(const std::string&)>& fetch) {
    const auto get = [&](const std::string& name) {
        auto text = fetch(name);
        if (!text) throw Error(ErrorCode::IoFailure, "missing prompt asset " + name);
        return *text;
    };
    PromptTemplates t;
    t.persona = trim(get("persona.txt"));
    t.task_diff_only = trim(get("task_diff_only.txt"));
    t.task_diff_message = trim(get("task_diff_message.txt"));
    t.steps_diff_only = nonblank_lines(get("steps_diff_only.txt"));
    t.steps_diff_message = nonblank_lines(get("steps_diff_message.txt"));
    t.format_single = trim(get("format_single.txt"));
    t.format_cot = trim(get("format_cot.txt"));
    t.examples_intro = trim(get("examples_intro.txt"));
    t.example = get("example.txt");
    t.layout_diff_only = get("layout_diff_only.txt");
    t.layout_diff_message = get("layout_diff_message.txt");
    return t;
}

std::optional<std::string> embedded_asset(const std::string& rel) {
    const auto& files = assets::embedded();
    auto it = files.find(rel);
    if (it == files.end()) return std::nullopt;
    return it->second;
}

std::string with_newline(std::string text) {
    if (!text.empty() && text.back() != '\n') text += '\n';
    return text;
}

std::string numbered(const std::vector<std::string>& steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i) out += '\n';
        out += std::to_string(i + 1) + ". " + steps[i];
    }
    return out;
}

}  // namespace

const PromptTemplates& PromptTemplates::builtin() {
    static const PromptTemplates t = load([](const std::string& name) { return embedded_asset("prompts/" + name); });
    return t;
}

PromptTemplates PromptTemplates::from_directory(const std::filesystem::path& dir) {
    return load([&](const std::string& name) -> std::optional<std::string> {
        const auto path = dir / name;
        if (std::filesystem::exists(path)) return read_file(path);
        return embedded_asset("prompts/" + name);
    });
}

InstructionBlock default_instructions(PromptVariant variant, const PromptTemplates& t) {
    InstructionBlock b;
    b.persona = t.persona;
    const bool diff_only = variant == PromptVariant::DiffOnly;
    b.task_description = diff_only ? t.task_diff_only : t.task_diff_message;
    b.behavioral_steps = diff_only ? t.steps_diff_only : t.steps_diff_message;
    b.output_format = expects_reasoning(variant) ? t.format_cot : t.format_single;
    return b;
}

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const std::size_t close = tmpl.find('}', open + 1);
        if (close != std::string_view::npos) {
            auto it = values.find(tmpl.substr(open + 1, close - open - 1));
            if (it != values.end()) {
                out += it->second;
                pos = close + 1;
                continue;
            }
        }
        out += '{';
        pos = open + 1;
    }
    return out;
}

PromptText render_prompt(PromptVariant variant, const MethodChange& change, const InstructionBlock& instructions,
                         const std::optional<ExamplePair>& examples, const RenderOptions& options) {
    const PromptTemplates& t = options.templates ? *options.templates : PromptTemplates::builtin();
    if (instructions.persona.empty() || instructions.task_description.empty() ||
        instructions.behavioral_steps.empty() || instructions.output_format.empty())
        throw Error(ErrorCode::InvalidArgument, "instruction block has an empty part");
    if (change.diff_text.empty()) throw Error(ErrorCode::InvalidArgument, "change " + change.change_id + " has no diff");
    if (uses_examples(variant) && !examples)
        throw Error(ErrorCode::MissingExamples, std::string(to_string(variant)) + " needs an example pair");
    if (!uses_examples(variant) && examples)
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(variant)) + " takes no examples");
    if (uses_message(variant) && trim(change.commit.message).empty())
        throw Error(ErrorCode::MissingMessage, "change " + change.change_id + " has an empty commit message");

    std::map<std::string, std::string, std::less<>> values{
        {"persona", instructions.persona},
        {"task", instructions.task_description},
        {"steps", numbered(instructions.behavioral_steps)},
        {"format", instructions.output_format},
        {"diff", with_newline(change.diff_text)},
    };
    std::string text;
    if (variant == PromptVariant::DiffOnly) {
        text = substitute(t.layout_diff_only, values);
    } else {
        std::string block;
        if (examples) {
            if (examples->buggy_example.label != Label::Buggy || examples->notbuggy_example.label != Label::NotBuggy)
                throw Error(ErrorCode::InvalidArgument, "example pair labels must be (Buggy, NotBuggy)");
            const auto render_example = [&](const Example& e) {
                return substitute(t.example, {{"label", std::string(to_string(e.label))},
                                              {"message", trim(e.message)},
                                              {"diff", with_newline(e.diff)}});
            };
            block = "\n" + t.examples_intro + "\n\n" + render_example(examples->buggy_example) + "\n" +
                    render_example(examples->notbuggy_example);
        }
        values["examples"] = std::move(block);
        values["message"] = trim(change.commit.message);
        text = substitute(t.layout_diff_message, values);
    }
    if (text.size() > options.max_chars)
        throw Error(ErrorCode::PromptTooLarge, "prompt for " + change.change_id + " has " + std::to_string(text.size()) +
                                                   " characters (limit " + std::to_string(options.max_chars) + ")");
    return PromptText{variant, std::move(text)};
}

PromptText render_prompt(PromptVariant variant, const MethodChange& change, const RenderOptions& options) {
    const PromptTemplates& t = options.templates ? *options.templates : PromptTemplates::builtin();
    std::optional<ExamplePair> examples;
    if (uses_examples(variant)) examples = builtin_example_pair();
    return render_prompt(variant, change, default_instructions(variant, t), examples, options);
}

const ExamplePair& builtin_example_pair() {
    static const ExamplePair pair = [] {
        const auto asset = [](const std::string& name) {
            auto text = embedded_asset("fewshot/" + name);
            if (!text) throw Error(ErrorCode::IoFailure, "missing few-shot asset " + name);
            return *text;
        };
        CommitRecord commit;
        commit.commit_id = "fewshot";
        commit.message = trim(asset("message.txt"));
        const auto r = diff_revisions(
            commit, {{"HexDigest.java", asset("HexDigest.before.java"), asset("HexDigest.after.java")}});
        const std::string buggy_sig = trim(asset("buggy.txt"));
        const std::string notbuggy_sig = trim(asset("notbuggy.txt"));
        ExamplePair p;
        bool found_buggy = false;
        bool found_notbuggy = false;
        for (const auto& c : r.changes) {
            if (c.method_signature == buggy_sig) {
                p.buggy_example = {commit.message, c.diff_text, Label::Buggy};
                found_buggy = true;
            } else if (c.method_signature == notbuggy_sig) {
                p.notbuggy_example = {commit.message, c.diff_text, Label::NotBuggy};
                found_notbuggy = true;
            }
        }
        if (!found_buggy || !found_notbuggy) throw Error(ErrorCode::ParseFailure, "few-shot fixture lost a method");
        return p;
    }();
    return pair;
}

}  // namespace untangle
