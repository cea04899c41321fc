#pragma once

#include "untangle/label.hpp"
#include "untangle/mining.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace untangle {

namespace assets {
// Files under assets/ baked into the binary, keyed by relative path
// ("prompts/persona.txt", "fewshot/message.txt", ...).
const std::map<std::string, std::string>& embedded();
}  // namespace assets

enum class PromptVariant { DiffOnly, DiffMessage, FewShot, ChainOfThought, FewShotCoT };

inline constexpr PromptVariant kAllVariants[] = {PromptVariant::DiffOnly, PromptVariant::DiffMessage,
                                                 PromptVariant::FewShot, PromptVariant::ChainOfThought,
                                                 PromptVariant::FewShotCoT};

// CLI names: diff-only, diff-message, fewshot, cot, fewshot-cot.
std::string_view to_string(PromptVariant variant) noexcept;
std::optional<PromptVariant> parse_variant(std::string_view name) noexcept;

bool uses_examples(PromptVariant variant) noexcept;
bool expects_reasoning(PromptVariant variant) noexcept;
bool uses_message(PromptVariant variant) noexcept;

struct InstructionBlock {
    std::string persona;
    std::string task_description;
    std::vector<std::string> behavioral_steps;
    std::string output_format;
};

struct Example {
    std::string message;
    std::string diff;
    Label label = Label::Buggy;
};

struct ExamplePair {
    Example buggy_example;
    Example notbuggy_example;
};

struct PromptText {
    PromptVariant variant = PromptVariant::DiffMessage;
    std::string text;
};

// Template text for every prompt part. Placeholders are {persona}, {task},
// {steps}, {format}, {examples}, {message}, {diff} and, inside the example
// template, {label}.
struct PromptTemplates {
    std::string persona;
    std::string task_diff_only;
    std::string task_diff_message;
    std::vector<std::string> steps_diff_only;
    std::vector<std::string> steps_diff_message;
    std::string format_single;
    std::string format_cot;
    std::string examples_intro;
    std::string example;
    std::string layout_diff_only;
    std::string layout_diff_message;

    static const PromptTemplates& builtin();
    // Reads the same file names as assets/prompts/ from `dir`; missing files
    // fall back to the built-in text.
    static PromptTemplates from_directory(const std::filesystem::path& dir);
};

InstructionBlock default_instructions(PromptVariant variant, const PromptTemplates& templates = PromptTemplates::builtin());

struct RenderOptions {
    std::size_t max_chars = 60000;
    const PromptTemplates* templates = nullptr;  // null: built-in
};

// Instructions, then the example block (few-shot variants only), then the
// query. DiffOnly never references the commit message.
// Throws MissingExamples, MissingMessage, PromptTooLarge, InvalidArgument.
PromptText render_prompt(PromptVariant variant, const MethodChange& change, const InstructionBlock& instructions,
                         const std::optional<ExamplePair>& examples, const RenderOptions& options = {});

// Convenience: default instructions, built-in pair for few-shot variants.
PromptText render_prompt(PromptVariant variant, const MethodChange& change, const RenderOptions& options = {});

// The fixed Buggy/NotBuggy pair, both diffed from one shipped commit.
const ExamplePair& builtin_example_pair();

// Replaces every {name} whose name is in `values` in one left-to-right
// pass; substituted text is never rescanned. Unknown braces stay literal.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

}  // namespace untangle
