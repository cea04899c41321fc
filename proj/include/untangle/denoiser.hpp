#pragma once

#include "untangle/code_metrics.hpp"
#include "untangle/label.hpp"
#include "untangle/mining.hpp"
#include "untangle/prompt.hpp"
#include "untangle/stat_tests.hpp"

#include <array>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace untangle {

class Gateway;

struct MethodHistory {
    std::string method_id;
    std::string project;
    std::string first_version_source;
    std::int64_t age_days = 0;
    std::vector<MethodChange> changes;  // by commit timestamp
};

// Groups changes by method_key(); ids are "<project>/<method_key>" (just the
// key when the project is empty). Age is measured from the earliest change
// to `reference_time` (default: the latest commit timestamp seen).
std::vector<MethodHistory> build_histories(std::span<const MethodChange> changes, const std::string& project,
                                           std::optional<std::int64_t> reference_time = std::nullopt);

struct PartitionCounts {
    std::size_t noisy_buggy = 0;
    std::size_t noisy_notbuggy = 0;
    std::size_t less_noisy_buggy = 0;
    std::size_t less_noisy_notbuggy = 0;
    std::size_t quarantined = 0;
    bool operator==(const PartitionCounts&) const = default;
};

struct PartitionSet {
    std::set<std::string> noisy_buggy;
    std::set<std::string> noisy_notbuggy;
    std::set<std::string> less_noisy_buggy;
    std::set<std::string> less_noisy_notbuggy;
    // Bug-fix methods whose verdicts were Unparseable and never Buggy.
    std::set<std::string> quarantined;
    std::map<std::string, PartitionCounts> per_project_counts;
    std::map<std::string, std::string> project_of;  // method id -> project
    std::size_t verdict_queries = 0;

    // Throws std::logic_error when a subset law is broken.
    void check_invariants() const;
};

// Verdicts for a batch of multi-method bug-fix changes, one per input, in order.
using BatchVerdictFn = std::function<std::vector<Label>(std::span<const MethodChange>)>;
using VerdictFn = std::function<Label(const MethodChange&)>;

BatchVerdictFn batch_of(VerdictFn fn);

// Renders each change with `variant` and classifies through the gateway.
// Changes that cannot be rendered come back Unparseable.
BatchVerdictFn gateway_verdicts(Gateway& gateway, PromptVariant variant, const RenderOptions& options = {});

// Multi-method bug-fix changes are queried once each (sorted by change_id);
// single-method bug-fix changes are trusted Buggy.
PartitionSet build_less_noisy(std::span<const MethodHistory> histories, const BatchVerdictFn& verdicts,
                              std::int64_t min_age_days = 730);

inline constexpr std::array<std::string_view, 5> kMetricNames = {"size", "readability", "mccabe", "fan_out", "mi"};

double metric_value(const CodeMetrics& metrics, std::string_view name);

struct SeparabilityRow {
    std::string project;
    std::string metric;
    std::string dataset;  // noisy | less_noisy
    double p_value = 1.0;
    double delta = 0.0;
    EffectCategory category = EffectCategory::Negligible;
    std::size_t n_buggy = 0;
    std::size_t n_notbuggy = 0;
};

struct SeparabilityReport {
    std::vector<SeparabilityRow> rows;
    std::map<std::string, std::string> excluded;  // project -> reason
};

// Throws MissingMetrics when a partition member has no metrics.
SeparabilityReport separability_report(const PartitionSet& partitions,
                                       const std::map<std::string, CodeMetrics>& metrics);

std::string report_csv(const SeparabilityReport& report);
// Per metric and dataset: share of projects in each effect category (percent).
std::string aggregate_csv(const SeparabilityReport& report);

json to_json(const PartitionSet& partitions);
PartitionSet partition_set_from_json(const json& doc);

}  // namespace untangle
