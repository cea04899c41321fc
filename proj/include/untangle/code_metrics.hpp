#pragma once

#include "untangle/io.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace untangle {

struct CodeMetrics {
    std::int64_t size = 0;  // SLOC
    double readability = 0.0;
    std::int64_t mccabe = 1;
    std::int64_t fan_out = 0;
    double mi = 0.0;
};

struct HalsteadCounts {
    std::int64_t distinct_operators = 0;
    std::int64_t distinct_operands = 0;
    std::int64_t total_operators = 0;
    std::int64_t total_operands = 0;
};

// Lines with code left after stripping comments.
std::int64_t sloc(std::string_view method_source);

// 1 + if, for, while, do, case, catch, ternary ?, &&, ||. The closing
// `while` of a do-while is not counted again. Throws ParseFailure.
std::int64_t mccabe(std::string_view method_source);

// Distinct callee names in the body (identifier followed by an argument
// list; keywords, annotations and local declarations excluded).
std::int64_t fan_out(std::string_view method_source);

// Keywords and punctuation are operators; identifiers and literals
// (including true/false/null) are operands.
HalsteadCounts halstead_counts(std::string_view method_source);

// N * log2(eta); 0 when eta < 2.
double halstead_volume(std::string_view method_source);
double halstead_volume(const HalsteadCounts& counts);

// max(0, 171 - 5.2 ln(max(V, 1)) - 0.23 CC - 16.2 ln(SLOC)).
double maintainability_index(double volume, std::int64_t cyclomatic, std::int64_t sloc);
// Throws InvalidArgument when the method has no code lines.
double maintainability_index(std::string_view method_source);

struct ReadabilityWeights {
    double w0 = 4.0;
    double w1 = 0.05;
    double w2 = 0.01;
    double w3 = 0.1;
    double w4 = 2.0;
    double w5 = 1.0;
};

struct ReadabilityFeatures {
    double avg_line_length = 0.0;  // over non-blank lines, raw characters
    double max_line_length = 0.0;
    double avg_identifier_length = 0.0;
    double branch_keyword_density = 0.0;  // branch tokens per non-blank line
    double comment_density = 0.0;         // comment lines per non-blank line
};

ReadabilityFeatures readability_features(std::string_view method_source);

// sigmoid(w0 - w1*avg_len - w2*max_len - w3*avg_ident - w4*branch + w5*comment)
double readability(std::string_view method_source, const ReadabilityWeights& weights = {});

CodeMetrics compute_metrics(std::string_view method_source, const ReadabilityWeights& weights = {});

json to_json(const CodeMetrics& metrics);

struct MetricsRow {
    std::string method_id;
    std::string project;
    CodeMetrics metrics;
};

// Columns: method_id, project, size, readability, mccabe, fan_out, mi.
std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(std::string_view text);

}  // namespace untangle
