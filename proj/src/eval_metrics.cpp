#include "untangle/eval_metrics.hpp"

#include "untangle/error.hpp"

#include <cmath>
#include <vector>

namespace untangle {

ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> truths, Label positive) {
    if (predictions.size() != truths.size())
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                   std::to_string(truths.size()) + " truths");
    if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
    if (positive == Label::Unparseable) throw Error(ErrorCode::InvalidLabel, "positive class must be a real label");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == Label::Unparseable || truths[i] == Label::Unparseable)
            throw Error(ErrorCode::InvalidLabel, "unparseable labels must be removed before scoring");
        const bool pred = predictions[i] == positive;
        const bool truth = truths[i] == positive;
        if (pred && truth)
            ++cm.tp;
        else if (pred)
            ++cm.fp;
        else if (truth)
            ++cm.fn_;
        else
            ++cm.tn;
    }
    return cm;
}

MetricsReport classification_metrics(const ConfusionMatrix& cm, std::int64_t unparseable_count) {
    if (cm.tp < 0 || cm.fp < 0 || cm.fn_ < 0 || cm.tn < 0)
        throw Error(ErrorCode::InvalidArgument, "confusion counts must be non-negative");
    if (cm.total() == 0) throw Error(ErrorCode::EmptyInput, "empty confusion matrix");
    MetricsReport r;
    r.unparseable_count = unparseable_count;
    const auto ratio = [&r](double num, double den) {
        if (den == 0.0) {
            r.degenerate = true;
            return 0.0;
        }
        return num / den;
    };
    const double tp = static_cast<double>(cm.tp);
    const double fp = static_cast<double>(cm.fp);
    const double fn = static_cast<double>(cm.fn_);
    const double tn = static_cast<double>(cm.tn);
    r.accuracy = (tp + tn) / static_cast<double>(cm.total());
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
    r.f1 = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
    r.mcc = ratio(tp * tn - fp * fn, std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)));
    return r;
}

ScoredPredictions score_predictions(std::span<const Label> predictions, std::span<const Label> truths) {
    if (predictions.size() != truths.size())
        throw Error(ErrorCode::LengthMismatch, "predictions and truths differ in length");
    std::vector<Label> p;
    std::vector<Label> t;
    std::int64_t unparseable = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == Label::Unparseable) {
            ++unparseable;
            continue;
        }
        p.push_back(predictions[i]);
        t.push_back(truths[i]);
    }
    ScoredPredictions s;
    s.matrix = confusion(p, t);
    s.metrics = classification_metrics(s.matrix, unparseable);
    return s;
}

json to_json(const MetricsReport& r) {
    return json{{"accuracy", r.accuracy},
                {"precision", r.precision},
                {"recall", r.recall},
                {"f1", r.f1},
                {"mcc", r.mcc},
                {"unparseable_count", r.unparseable_count}};
}

json to_json(const ConfusionMatrix& cm) { return json{{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn_}, {"tn", cm.tn}}; }

}  // namespace untangle
