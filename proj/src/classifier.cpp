#include "untangle/classifier.hpp"

#include "untangle/error.hpp"
#include "untangle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace untangle {

void TrainConfig::validate() const {
    if (hidden_units < 1) throw Error(ErrorCode::InvalidArgument, "hidden_units must be positive");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
    if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be positive");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");
    if (!(l2 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "l2 must be >= 0");
}

std::string_view to_string(ModelKind kind) noexcept { return kind == ModelKind::Mlp ? "mlp" : "logistic"; }

std::optional<ModelKind> parse_model_kind(std::string_view name) noexcept {
    const auto n = to_lower(name);
    if (n == "mlp") return ModelKind::Mlp;
    if (n == "logistic" || n == "logreg") return ModelKind::Logistic;
    return std::nullopt;
}

std::size_t ModelArtifact::param_count() const {
    return kind == ModelKind::Mlp ? hidden_units * feature_dim + 2 * hidden_units + 1 : feature_dim + 1;
}

bool ModelArtifact::is_weight(std::size_t i) const {
    if (kind == ModelKind::Logistic) return i < feature_dim;
    const std::size_t w1 = hidden_units * feature_dim;
    return i < w1 || (i >= w1 + hidden_units && i < w1 + 2 * hidden_units);
}

bool ModelArtifact::operator==(const ModelArtifact& o) const {
    const auto bits_equal = [](const std::vector<double>& a, const std::vector<double>& b) {
        return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
                   return std::memcmp(&x, &y, sizeof x) == 0;
               });
    };
    return kind == o.kind && feature_dim == o.feature_dim && hidden_units == o.hidden_units &&
           bits_equal(params, o.params) && bits_equal(mean, o.mean) && bits_equal(scale, o.scale) &&
           train_config.hidden_units == o.train_config.hidden_units &&
           train_config.learning_rate == o.train_config.learning_rate && train_config.epochs == o.train_config.epochs &&
           train_config.batch_size == o.train_config.batch_size && train_config.seed == o.train_config.seed &&
           train_config.l2 == o.train_config.l2;
}

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// -log p(y | z) for a logit z, computed without overflow.
double bce_from_logit(double z, double y) { return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z))); }

double target(Label label) { return label == Label::Buggy ? 1.0 : 0.0; }

// Forward pass on a standardized input. `hidden` receives post-activation
// values (MLP only).
double logit(const ModelArtifact& m, const double* x, std::vector<double>& hidden) {
    const std::size_t d = m.feature_dim;
    const double* p = m.params.data();
    if (m.kind == ModelKind::Logistic) {
        double z = p[d];
        for (std::size_t i = 0; i < d; ++i) z += p[i] * x[i];
        return z;
    }
    const std::size_t h = m.hidden_units;
    const double* b1 = p + h * d;
    const double* w2 = b1 + h;
    hidden.resize(h);
    double z = w2[h];
    for (std::size_t j = 0; j < h; ++j) {
        const double* row = p + j * d;
        double a = b1[j];
        for (std::size_t i = 0; i < d; ++i) a += row[i] * x[i];
        hidden[j] = a > 0.0 ? a : 0.0;
        z += w2[j] * hidden[j];
    }
    return z;
}

// Adds scale * dLoss/dparams for one sample (data term only).
double accumulate_gradient(const ModelArtifact& m, const double* x, double y, double scale, std::vector<double>& grad,
                           std::vector<double>& hidden) {
    const double z = logit(m, x, hidden);
    const double dz = (sigmoid(z) - y) * scale;
    const std::size_t d = m.feature_dim;
    if (m.kind == ModelKind::Logistic) {
        for (std::size_t i = 0; i < d; ++i) grad[i] += dz * x[i];
        grad[d] += dz;
        return bce_from_logit(z, y);
    }
    const std::size_t h = m.hidden_units;
    const double* w2 = m.params.data() + h * d + h;
    double* g_w1 = grad.data();
    double* g_b1 = g_w1 + h * d;
    double* g_w2 = g_b1 + h;
    g_w2[h] += dz;
    for (std::size_t j = 0; j < h; ++j) {
        g_w2[j] += dz * hidden[j];
        if (hidden[j] <= 0.0) continue;
        const double dh = dz * w2[j];
        g_b1[j] += dh;
        double* row = g_w1 + j * d;
        for (std::size_t i = 0; i < d; ++i) row[i] += dh * x[i];
    }
    return bce_from_logit(z, y);
}

double l2_penalty(const ModelArtifact& m, double l2) {
    if (l2 == 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < m.params.size(); ++i)
        if (m.is_weight(i)) s += m.params[i] * m.params[i];
    return 0.5 * l2 * s;
}

// Loss in extended precision for the finite-difference side of the gradient
// check; in double, roundoff alone reaches 1e-11 on tiny gradients at h=1e-5.
long double reference_loss(const ModelArtifact& m, const std::vector<double>& x, double y, double l2) {
    const std::size_t d = m.feature_dim;
    const double* p = m.params.data();
    long double z;
    if (m.kind == ModelKind::Logistic) {
        z = p[d];
        for (std::size_t i = 0; i < d; ++i) z += static_cast<long double>(p[i]) * x[i];
    } else {
        const std::size_t h = m.hidden_units;
        const double* b1 = p + h * d;
        const double* w2 = b1 + h;
        z = w2[h];
        for (std::size_t j = 0; j < h; ++j) {
            long double a = b1[j];
            for (std::size_t i = 0; i < d; ++i) a += static_cast<long double>(p[j * d + i]) * x[i];
            if (a > 0) z += static_cast<long double>(w2[j]) * a;
        }
    }
    long double loss = std::max(z, 0.0L) - y * z + std::log1p(std::exp(-std::abs(z)));
    if (l2 != 0.0) {
        long double s = 0;
        for (std::size_t i = 0; i < m.params.size(); ++i)
            if (m.is_weight(i)) s += static_cast<long double>(m.params[i]) * m.params[i];
        loss += 0.5L * l2 * s;
    }
    return loss;
}

void add_l2_gradient(const ModelArtifact& m, double l2, std::vector<double>& grad) {
    if (l2 == 0.0) return;
    for (std::size_t i = 0; i < m.params.size(); ++i)
        if (m.is_weight(i)) grad[i] += l2 * m.params[i];
}

std::vector<double> standardize(const ModelArtifact& m, std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m.mean[i]) / m.scale[i];
    return out;
}

std::size_t common_dimension(std::span<const LabeledVector> items) {
    if (items.empty()) throw Error(ErrorCode::EmptyInput, "no training items");
    const std::size_t d = items.front().features.size();
    if (d == 0) throw Error(ErrorCode::DimensionMismatch, "feature vectors are empty");
    for (const auto& it : items)
        if (it.features.size() != d)
            throw Error(ErrorCode::DimensionMismatch, "feature vectors differ in length (" + std::to_string(d) + " vs " +
                                                          std::to_string(it.features.size()) + ")");
    return d;
}

ModelArtifact train_impl(std::span<const LabeledVector> items, const TrainConfig& cfg, ModelKind kind,
                         bool require_both_classes) {
    cfg.validate();
    const std::size_t d = common_dimension(items);
    const auto n_buggy = std::count_if(items.begin(), items.end(), [](auto& it) { return it.label == Label::Buggy; });
    const auto n_not = std::count_if(items.begin(), items.end(), [](auto& it) { return it.label == Label::NotBuggy; });
    if (n_buggy + n_not != static_cast<long>(items.size()))
        throw Error(ErrorCode::InvalidLabel, "training labels must be Buggy or NotBuggy");
    if (require_both_classes && (n_buggy == 0 || n_not == 0))
        throw Error(ErrorCode::DegenerateClass, "training data needs at least one example per class");

    ModelArtifact m = init_model(kind, d, cfg);
    const std::size_t n = items.size();
    for (std::size_t i = 0; i < d; ++i) {
        double mu = 0.0;
        for (const auto& it : items) mu += it.features[i];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& it : items) var += (it.features[i] - mu) * (it.features[i] - mu);
        const double sd = std::sqrt(var / static_cast<double>(n));
        m.mean[i] = mu;
        m.scale[i] = sd > 0.0 ? sd : 1.0;
    }
    std::vector<std::vector<double>> xs;
    xs.reserve(n);
    for (const auto& it : items) xs.push_back(standardize(m, it.features));

    // The init consumed its own stream; shuffling uses a derived one.
    Rng rng(cfg.seed ^ 0x5bd1e995a9e3779bULL);
    const std::size_t p = m.param_count();
    std::vector<double> grad(p), m1(p, 0.0), m2(p, 0.0), hidden;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double b1t = 1.0, b2t = 1.0;
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            const double inv = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            for (std::size_t k = start; k < end; ++k)
                loss += accumulate_gradient(m, xs[order[k]].data(), target(items[order[k]].label), inv, grad, hidden);
            loss = loss * inv + l2_penalty(m, cfg.l2);
            add_l2_gradient(m, cfg.l2, grad);
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "loss became " << loss << " at epoch " << epoch << ", batch starting " << start
                    << " (lr=" << cfg.learning_rate << ", l2=" << cfg.l2 << ")";
                throw Error(ErrorCode::NonFiniteLoss, msg.str());
            }
            epoch_loss += loss * static_cast<double>(end - start);
            b1t *= beta1;
            b2t *= beta2;
            for (std::size_t i = 0; i < p; ++i) {
                m1[i] = beta1 * m1[i] + (1 - beta1) * grad[i];
                m2[i] = beta2 * m2[i] + (1 - beta2) * grad[i] * grad[i];
                const double mhat = m1[i] / (1 - b1t);
                const double vhat = m2[i] / (1 - b2t);
                m.params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + eps);
            }
        }
        if (!std::isfinite(epoch_loss))
            throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + " loss is not finite");
    }
    for (double w : m.params)
        if (!std::isfinite(w)) throw Error(ErrorCode::NonFiniteLoss, "weights diverged");
    return m;
}

}  // namespace

ModelArtifact init_model(ModelKind kind, std::size_t feature_dim, const TrainConfig& cfg) {
    ModelArtifact m;
    m.kind = kind;
    m.feature_dim = feature_dim;
    m.hidden_units = kind == ModelKind::Mlp ? static_cast<std::size_t>(cfg.hidden_units) : 0;
    m.train_config = cfg;
    m.mean.assign(feature_dim, 0.0);
    m.scale.assign(feature_dim, 1.0);
    m.params.assign(m.param_count(), 0.0);
    Rng rng(cfg.seed);
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    if (kind == ModelKind::Logistic) {
        for (std::size_t i = 0; i < feature_dim; ++i) m.params[i] = rng.uniform(-in_bound, in_bound);
        return m;
    }
    const std::size_t h = m.hidden_units;
    for (std::size_t i = 0; i < h * feature_dim; ++i) m.params[i] = rng.uniform(-in_bound, in_bound);
    const double hid_bound = 1.0 / std::sqrt(static_cast<double>(h));
    for (std::size_t j = 0; j < h; ++j) m.params[h * feature_dim + h + j] = rng.uniform(-hid_bound, hid_bound);
    return m;
}

std::pair<std::vector<LabeledVector>, std::vector<LabeledVector>> split_dataset(std::span<const LabeledVector> items,
                                                                                double train_fraction,
                                                                                std::uint64_t seed) {
    if (items.empty()) throw Error(ErrorCode::EmptyInput, "no items to split");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "train_fraction must be in (0, 1)");

    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].label == Label::Unparseable) throw Error(ErrorCode::InvalidLabel, "item " + items[i].id + " is unlabeled");
        by_class[items[i].label == Label::Buggy ? 0 : 1].push_back(i);
    }
    for (const auto& c : by_class)
        if (c.size() < 2) throw Error(ErrorCode::DegenerateClass, "each class needs at least 2 items");

    const auto n = static_cast<double>(items.size());
    const auto target_total = static_cast<std::size_t>(std::floor(train_fraction * n));
    std::size_t take[2];
    double remainder[2];
    for (int c = 0; c < 2; ++c) {
        const double exact = train_fraction * static_cast<double>(by_class[c].size());
        take[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - std::floor(exact);
    }
    std::size_t assigned = take[0] + take[1];
    while (assigned < target_total) {
        const int c = remainder[0] >= remainder[1] ? 0 : 1;
        ++take[c];
        remainder[c] = -1.0;
        ++assigned;
    }
    // Keep at least one item of each class on both sides.
    for (int c = 0; c < 2; ++c) take[c] = std::clamp<std::size_t>(take[c], 1, by_class[c].size() - 1);

    Rng rng(seed);
    std::vector<LabeledVector> train_set;
    std::vector<LabeledVector> test_set;
    for (int c = 0; c < 2; ++c) {
        rng.shuffle(std::span<std::size_t>(by_class[c]));
        for (std::size_t k = 0; k < by_class[c].size(); ++k)
            (k < take[c] ? train_set : test_set).push_back(items[by_class[c][k]]);
    }
    rng.shuffle(std::span<LabeledVector>(train_set));
    rng.shuffle(std::span<LabeledVector>(test_set));
    return {std::move(train_set), std::move(test_set)};
}

ModelArtifact train(std::span<const LabeledVector> items, const TrainConfig& cfg, ModelKind kind) {
    return train_impl(items, cfg, kind, true);
}

Prediction predict(const ModelArtifact& model, std::span<const double> features) {
    if (features.size() != model.feature_dim)
        throw Error(ErrorCode::DimensionMismatch, "vector has " + std::to_string(features.size()) +
                                                      " values, model expects " + std::to_string(model.feature_dim));
    const auto x = standardize(model, features);
    std::vector<double> hidden;
    Prediction p;
    p.score = sigmoid(logit(model, x.data(), hidden));
    p.label = p.score >= 0.5 ? Label::Buggy : Label::NotBuggy;
    return p;
}

EvalReport evaluate_split(std::span<const LabeledVector> items, double train_fraction, const TrainConfig& cfg,
                          ModelKind kind) {
    auto [train_set, test_set] = split_dataset(items, train_fraction, cfg.seed);
    const auto model = train(train_set, cfg, kind);
    std::vector<Label> predicted;
    std::vector<Label> truth;
    for (const auto& it : test_set) {
        predicted.push_back(predict(model, it.features).label);
        truth.push_back(it.label);
    }
    EvalReport r;
    r.protocol = "split";
    r.n = items.size();
    r.n_train = train_set.size();
    r.n_test = test_set.size();
    r.confusion = confusion(predicted, truth);
    r.metrics = classification_metrics(r.confusion);
    return r;
}

EvalReport evaluate_loo(std::span<const LabeledVector> items, const TrainConfig& cfg, ModelKind kind) {
    if (items.size() < 3) throw Error(ErrorCode::InvalidArgument, "leave-one-out needs at least 3 items");
    common_dimension(items);
    std::vector<Label> predicted;
    std::vector<Label> truth;
    std::vector<LabeledVector> rest;
    for (std::size_t k = 0; k < items.size(); ++k) {
        rest.clear();
        for (std::size_t i = 0; i < items.size(); ++i)
            if (i != k) rest.push_back(items[i]);
        // A round may see a single class; the model then learns that prior.
        const auto model = train_impl(rest, cfg, kind, false);
        predicted.push_back(predict(model, items[k].features).label);
        truth.push_back(items[k].label);
    }
    EvalReport r;
    r.protocol = "loo";
    r.n = items.size();
    r.n_train = items.size() - 1;
    r.n_test = 1;
    r.confusion = confusion(predicted, truth);
    r.metrics = classification_metrics(r.confusion);
    return r;
}

GradientCheck gradient_check_detail(ModelKind kind, std::span<const double> features, Label label,
                                    const TrainConfig& cfg) {
    cfg.validate();
    if (features.empty()) throw Error(ErrorCode::DimensionMismatch, "empty sample");
    ModelArtifact m = init_model(kind, features.size(), cfg);
    const double y = target(label);
    const std::vector<double> x(features.begin(), features.end());
    std::vector<double> hidden;

    std::vector<double> grad(m.param_count(), 0.0);
    accumulate_gradient(m, x.data(), y, 1.0, grad, hidden);
    add_l2_gradient(m, cfg.l2, grad);


    GradientCheck out;
    const std::size_t p = m.param_count();
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const std::size_t want = std::min<std::size_t>(p, 64);
    Rng rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
    for (std::size_t i = 0; i < want; ++i) std::swap(all[i], all[i + rng.below(p - i)]);
    all.resize(want);
    std::sort(all.begin(), all.end());

    constexpr double h = 1e-5;
    for (std::size_t idx : all) {
        const double saved = m.params[idx];
        const double hi = saved + h, lo = saved - h;
        m.params[idx] = hi;
        const long double up = reference_loss(m, x, y, cfg.l2);
        m.params[idx] = lo;
        const long double down = reference_loss(m, x, y, cfg.l2);
        m.params[idx] = saved;
        // Divide by the step actually taken after rounding.
        const double numeric = static_cast<double>((up - down) / (static_cast<long double>(hi) - lo));
        const double a = grad[idx];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        out.max_relative_error = std::max(out.max_relative_error, rel);
        out.indices.push_back(idx);
        out.analytic.push_back(a);
        out.numeric.push_back(numeric);
    }
    return out;
}

double gradient_check(ModelKind kind, std::span<const double> features, Label label, const TrainConfig& cfg) {
    return gradient_check_detail(kind, features, label, cfg).max_relative_error;
}

json to_json(const TrainConfig& c) {
    return json{{"hidden_units", c.hidden_units}, {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
                {"batch_size", c.batch_size},     {"seed", c.seed},                   {"l2", c.l2}};
}

json to_json(const ModelArtifact& m) {
    json weights;
    const auto slice = [&](std::size_t from, std::size_t count) {
        return std::vector<double>(m.params.begin() + static_cast<long>(from),
                                   m.params.begin() + static_cast<long>(from + count));
    };
    if (m.kind == ModelKind::Mlp) {
        const std::size_t hd = m.hidden_units * m.feature_dim;
        weights["input_hidden"] = slice(0, hd);
        weights["hidden_bias"] = slice(hd, m.hidden_units);
        weights["hidden_output"] = slice(hd + m.hidden_units, m.hidden_units);
        weights["output_bias"] = m.params.back();
    } else {
        weights["input_output"] = slice(0, m.feature_dim);
        weights["output_bias"] = m.params.back();
    }
    return json{{"format", "untangle-model"},
                {"version", 1},
                {"kind", std::string(to_string(m.kind))},
                {"feature_dim", m.feature_dim},
                {"hidden_units", m.hidden_units},
                {"classes", {"Buggy", "NotBuggy"}},
                {"train_config", to_json(m.train_config)},
                {"standardization", {{"mean", m.mean}, {"scale", m.scale}}},
                {"weights", std::move(weights)}};
}

ModelArtifact model_from_json(const json& doc) {
    try {
        if (doc.value("format", "") != "untangle-model" || doc.value("version", 0) != 1)
            throw Error(ErrorCode::ParseFailure, "not a version 1 model artifact");
        ModelArtifact m;
        const auto kind = parse_model_kind(doc.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::ParseFailure, "unknown model kind");
        m.kind = *kind;
        m.feature_dim = doc.at("feature_dim").get<std::size_t>();
        m.hidden_units = doc.at("hidden_units").get<std::size_t>();
        const auto& tc = doc.at("train_config");
        m.train_config.hidden_units = tc.at("hidden_units").get<int>();
        m.train_config.learning_rate = tc.at("learning_rate").get<double>();
        m.train_config.epochs = tc.at("epochs").get<int>();
        m.train_config.batch_size = tc.at("batch_size").get<int>();
        m.train_config.seed = tc.at("seed").get<std::uint64_t>();
        m.train_config.l2 = tc.at("l2").get<double>();
        m.mean = doc.at("standardization").at("mean").get<std::vector<double>>();
        m.scale = doc.at("standardization").at("scale").get<std::vector<double>>();
        const auto& w = doc.at("weights");
        if (m.kind == ModelKind::Mlp) {
            for (const char* key : {"input_hidden", "hidden_bias", "hidden_output"}) {
                const auto part = w.at(key).get<std::vector<double>>();
                m.params.insert(m.params.end(), part.begin(), part.end());
            }
        } else {
            m.params = w.at("input_output").get<std::vector<double>>();
        }
        m.params.push_back(w.at("output_bias").get<double>());
        if (m.params.size() != m.param_count() || m.mean.size() != m.feature_dim || m.scale.size() != m.feature_dim)
            throw Error(ErrorCode::DimensionMismatch, "model tensors do not match the declared shapes");
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("malformed model artifact: ") + e.what());
    }
}

void save_model(const ModelArtifact& model, const std::filesystem::path& path) {
    write_file(path, to_json(model).dump() + "\n");
}

ModelArtifact load_model(const std::filesystem::path& path) {
    try {
        return model_from_json(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseFailure, path.string() + ": " + e.what());
    }
}

json to_json(const EvalReport& r) {
    return json{{"protocol", r.protocol},
                {"n", r.n},
                {"n_train", r.n_train},
                {"n_test", r.n_test},
                {"confusion", to_json(r.confusion)},
                {"metrics", to_json(r.metrics)}};
}

}  // namespace untangle
