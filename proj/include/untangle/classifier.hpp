#pragma once

#include "untangle/eval_metrics.hpp"
#include "untangle/io.hpp"
#include "untangle/label.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace untangle {

struct TrainConfig {
    int hidden_units = 256;
    double learning_rate = 0.001;
    int epochs = 200;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double l2 = 0.0001;

    void validate() const;  // throws InvalidArgument
};

enum class ModelKind { Mlp, Logistic };

std::string_view to_string(ModelKind kind) noexcept;
std::optional<ModelKind> parse_model_kind(std::string_view name) noexcept;

struct LabeledVector {
    std::vector<double> features;
    Label label = Label::Buggy;
    std::string id;
};

// Trained weights plus the standardization fitted on the training split.
//
// Parameters are stored flat. MLP layout: input->hidden weights
// (hidden_units x feature_dim, row-major), hidden biases, hidden->output
// weights, output bias. Logistic layout: feature weights, bias.
struct ModelArtifact {
    ModelKind kind = ModelKind::Mlp;
    std::size_t feature_dim = 0;
    std::size_t hidden_units = 0;
    std::vector<double> params;
    std::vector<double> mean;
    std::vector<double> scale;
    TrainConfig train_config;

    std::size_t param_count() const;
    // Indices into params that carry L2 regularization (weights, not biases).
    bool is_weight(std::size_t index) const;

    bool operator==(const ModelArtifact& other) const;
};

// Stratified: the train size is floor(fraction * n), shared out over the
// classes by largest remainder. Throws DegenerateClass (a class < 2 items),
// EmptyInput, InvalidArgument.
std::pair<std::vector<LabeledVector>, std::vector<LabeledVector>> split_dataset(std::span<const LabeledVector> items,
                                                                                double train_fraction,
                                                                                std::uint64_t seed);

// Throws DegenerateClass (a class missing), DimensionMismatch, NonFiniteLoss.
ModelArtifact train(std::span<const LabeledVector> items, const TrainConfig& cfg, ModelKind kind);

struct Prediction {
    Label label = Label::Buggy;
    double score = 0.5;  // P(Buggy)
};

// Buggy iff score >= 0.5. Throws DimensionMismatch.
Prediction predict(const ModelArtifact& model, std::span<const double> features);

struct EvalReport {
    std::string protocol;  // "split" or "loo"
    std::size_t n = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    ConfusionMatrix confusion;
    MetricsReport metrics;
};

EvalReport evaluate_split(std::span<const LabeledVector> items, double train_fraction, const TrainConfig& cfg,
                          ModelKind kind);

// n rounds, each holding out one item; one confusion matrix over all
// held-out predictions. Requires n >= 3 (InvalidArgument).
EvalReport evaluate_loo(std::span<const LabeledVector> items, const TrainConfig& cfg, ModelKind kind);

// Max relative error between the analytic gradient of the regularized
// single-sample loss and central differences (h = 1e-5) over a seeded subset
// of at least 50 parameters (all of them when fewer exist).
struct GradientCheck {
    double max_relative_error = 0.0;
    std::vector<std::size_t> indices;
    std::vector<double> analytic;
    std::vector<double> numeric;
};
GradientCheck gradient_check_detail(ModelKind kind, std::span<const double> features, Label label,
                                    const TrainConfig& cfg);
double gradient_check(ModelKind kind, std::span<const double> features, Label label, const TrainConfig& cfg);

// Freshly initialized (untrained) model with identity standardization.
ModelArtifact init_model(ModelKind kind, std::size_t feature_dim, const TrainConfig& cfg);

json to_json(const ModelArtifact& model);
ModelArtifact model_from_json(const json& doc);
void save_model(const ModelArtifact& model, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

json to_json(const EvalReport& report);
json to_json(const TrainConfig& cfg);

}  // namespace untangle
