#pragma once

#include "untangle/io.hpp"
#include "untangle/label.hpp"

#include <cstdint>
#include <span>

namespace untangle {

struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn_ = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn_ + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
    std::int64_t unparseable_count = 0;
    bool degenerate = false;  // some ratio was 0/0 and reported as 0
};

// Unparseable predictions must be filtered out first (InvalidLabel).
// Throws LengthMismatch, EmptyInput.
ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> truths,
                          Label positive = Label::Buggy);

// Throws EmptyInput when the matrix is empty.
MetricsReport classification_metrics(const ConfusionMatrix& cm, std::int64_t unparseable_count = 0);

// Drops Unparseable predictions (counted) and scores the rest.
struct ScoredPredictions {
    ConfusionMatrix matrix;
    MetricsReport metrics;
};
ScoredPredictions score_predictions(std::span<const Label> predictions, std::span<const Label> truths);

// Keys exactly: accuracy, precision, recall, f1, mcc, unparseable_count.
json to_json(const MetricsReport& report);
json to_json(const ConfusionMatrix& cm);

}  // namespace untangle
