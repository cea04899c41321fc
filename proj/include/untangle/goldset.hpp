#pragma once

#include "untangle/label.hpp"
#include "untangle/mining.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace untangle {

enum class LabelSource { AutoSingleMethodFix, AutoNeverInFix, HumanRater };

std::string_view to_string(LabelSource source) noexcept;

struct LabeledChange {
    MethodChange change;
    Label label = Label::Buggy;
    LabelSource label_source = LabelSource::HumanRater;
    std::optional<std::string> rater_id;
    std::optional<std::string> note;
};

struct KappaResult {
    double kappa = 0.0;
    double observed_agreement = 0.0;
    double expected_agreement = 0.0;
    int n = 0;
    bool degenerate = false;  // expected agreement was 1
};

struct GoldsetOptions {
    std::size_t notbuggy_cap = 730;
    std::uint64_t seed = 0;
    // NotBuggy candidates must have been first seen at least this long
    // before the reference time.
    std::int64_t min_age_days = 730;
    // Defaults to the newest commit timestamp among the input changes.
    std::optional<std::int64_t> reference_time;
};

// Buggy: every change in a bug-fix commit that touched exactly one method.
// NotBuggy: changes of methods that never appear in a bug-fix commit and
// are old enough, sampled uniformly (seeded) up to the cap. Exact duplicate
// diff texts are dropped, keeping the first occurrence (Buggy rows first).
std::vector<LabeledChange> build_automated_goldset(std::span<const MethodChange> changes,
                                                   const GoldsetOptions& options);

std::vector<LabeledChange> build_automated_goldset(std::span<const MethodChange> changes, std::size_t notbuggy_cap,
                                                   std::uint64_t seed);

// Two raters, two categories. When expected agreement is 1 the result is
// flagged degenerate with kappa 1 (perfect observed agreement) or 0.
KappaResult cohens_kappa(std::span<const Label> ratings_a, std::span<const Label> ratings_b);

enum class ExportFormat { Jsonl, Csv };

// Writes records sorted by change_id and returns the SHA-256 of the file bytes.
std::string export_dataset(std::span<const LabeledChange> records, const std::filesystem::path& path,
                           ExportFormat format);

// The exact bytes export_dataset writes.
std::string render_dataset(std::span<const LabeledChange> records, ExportFormat format);

json to_json(const LabeledChange& record);
json to_json(const KappaResult& result);
LabeledChange labeled_change_from_json(const json& row);
std::vector<LabeledChange> read_labeled_changes(const std::filesystem::path& path);

}  // namespace untangle
