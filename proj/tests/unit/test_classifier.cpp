#include "support/fixture.hpp"
#include "untangle/classifier.hpp"
#include "untangle/rng.hpp"

#include <doctest.h>

using namespace untangle;

namespace {

LabeledVector lifted(double x, double y, Label label, std::size_t dim = 768) {
    LabeledVector v;
    v.features.assign(dim, 0.0);
    v.features[0] = x;
    v.features[1] = y;
    v.label = label;
    return v;
}

double train_accuracy(const ModelArtifact& m, const std::vector<LabeledVector>& items) {
    int ok = 0;
    for (const auto& it : items) ok += predict(m, it.features).label == it.label;
    return static_cast<double>(ok) / static_cast<double>(items.size());
}

std::vector<LabeledVector> xor_set() {
    std::vector<LabeledVector> s;
    for (int rep = 0; rep < 3; ++rep) {
        const double j = 0.01 * rep;
        s.push_back(lifted(0 + j, 0, Label::NotBuggy, 8));
        s.push_back(lifted(1 + j, 1, Label::NotBuggy, 8));
        s.push_back(lifted(0 + j, 1, Label::Buggy, 8));
        s.push_back(lifted(1 + j, 0, Label::Buggy, 8));
    }
    return s;
}

TrainConfig small_cfg() {
    TrainConfig cfg;
    cfg.hidden_units = 16;
    cfg.learning_rate = 0.05;
    cfg.epochs = 300;
    cfg.batch_size = 4;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("stratified split sizes") {
    std::vector<LabeledVector> items;
    for (int i = 0; i < 1764; ++i) items.push_back(lifted(i, 0, i < 730 ? Label::Buggy : Label::NotBuggy, 2));
    const auto [train_set, test_set] = split_dataset(items, 0.8, 1);
    CHECK(train_set.size() == 1411);
    CHECK(test_set.size() == 353);

    std::vector<LabeledVector> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(lifted(i, 0, i % 2 ? Label::Buggy : Label::NotBuggy, 2));
    const auto [tr, te] = split_dataset(ten, 0.8, 4);
    CHECK(std::count_if(tr.begin(), tr.end(), [](auto& v) { return v.label == Label::Buggy; }) == 4);
    CHECK(std::count_if(tr.begin(), tr.end(), [](auto& v) { return v.label == Label::NotBuggy; }) == 4);

    // Partition and determinism.
    const auto [tr2, te2] = split_dataset(ten, 0.8, 4);
    std::vector<double> a, b;
    for (const auto& v : tr) a.push_back(v.features[0]);
    for (const auto& v : tr2) b.push_back(v.features[0]);
    CHECK(a == b);
    for (const auto& v : te) a.push_back(v.features[0]);
    std::sort(a.begin(), a.end());
    CHECK(a == std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

    std::vector<LabeledVector> lonely{lifted(0, 0, Label::Buggy, 2), lifted(1, 0, Label::NotBuggy, 2),
                                      lifted(2, 0, Label::NotBuggy, 2)};
    CHECK_THROWS_AS(split_dataset(lonely, 0.8, 0), Error);
    CHECK_THROWS_AS(split_dataset(ten, 1.0, 0), Error);
    CHECK_THROWS_AS(split_dataset(std::vector<LabeledVector>{}, 0.5, 0), Error);
}

TEST_CASE("logistic separates a linearly separable set") {
    std::vector<LabeledVector> items;
    Rng rng(2);
    for (int i = 0; i < 40; ++i) {
        const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
        if (std::abs(x + y) < 0.1) continue;
        items.push_back(lifted(x, y, x + y > 0 ? Label::Buggy : Label::NotBuggy));
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 8;
    const auto m = train(items, cfg, ModelKind::Logistic);
    CHECK(train_accuracy(m, items) == 1.0);
}

TEST_CASE("xor needs the hidden layer") {
    const auto items = xor_set();
    const auto mlp = train(items, small_cfg(), ModelKind::Mlp);
    CHECK(train_accuracy(mlp, items) == 1.0);
    const auto lin = train(items, small_cfg(), ModelKind::Logistic);
    CHECK(train_accuracy(lin, items) <= 0.75);
}

TEST_CASE("training is bit-reproducible and serializes exactly") {
    const auto items = xor_set();
    const auto a = train(items, small_cfg(), ModelKind::Mlp);
    const auto b = train(items, small_cfg(), ModelKind::Mlp);
    CHECK(a == b);
    auto other = small_cfg();
    other.seed = 4;
    CHECK_FALSE(a == train(items, other, ModelKind::Mlp));

    fixture::TempDir dir;
    save_model(a, dir / "m.json");
    const auto back = load_model(dir / "m.json");
    CHECK(back == a);
    for (const auto& it : items) CHECK(predict(back, it.features).score == predict(a, it.features).score);
}

TEST_CASE("prediction boundary and dimension checks") {
    auto m = init_model(ModelKind::Logistic, 768, TrainConfig{});
    std::fill(m.params.begin(), m.params.end(), 0.0);
    const std::vector<double> x(768, 3.0);
    const auto p = predict(m, x);
    CHECK(p.score == 0.5);
    CHECK(p.label == Label::Buggy);
    CHECK_THROWS_AS(predict(m, std::vector<double>(767, 0.0)), Error);
    Rng rng(1);
    const auto trained = train(xor_set(), small_cfg(), ModelKind::Mlp);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> v(8);
        for (auto& e : v) e = rng.uniform(-50, 50);
        const double s = predict(trained, v).score;
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("training errors") {
    std::vector<LabeledVector> one_class{lifted(0, 0, Label::Buggy, 4), lifted(1, 0, Label::Buggy, 4)};
    CHECK_THROWS_AS(train(one_class, small_cfg(), ModelKind::Mlp), Error);
    std::vector<LabeledVector> ragged{lifted(0, 0, Label::Buggy, 4), lifted(1, 0, Label::NotBuggy, 5)};
    CHECK_THROWS_AS(train(ragged, small_cfg(), ModelKind::Mlp), Error);
    auto cfg = small_cfg();
    cfg.learning_rate = 1e300;
    try {
        train(xor_set(), cfg, ModelKind::Mlp);
        FAIL("expected NonFiniteLoss");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteLoss);
    }
    CHECK(parse_model_kind("mlp") == ModelKind::Mlp);
    CHECK_FALSE(parse_model_kind("svm").has_value());
}

TEST_CASE("leave-one-out") {
    // Two tight clusters; each held-out point sits inside its own cluster.
    std::vector<LabeledVector> items{lifted(0, 0, Label::NotBuggy, 4), lifted(0.1, 0, Label::NotBuggy, 4),
                                     lifted(5, 5, Label::Buggy, 4), lifted(5.1, 5, Label::Buggy, 4)};
    TrainConfig cfg = small_cfg();
    const auto r = evaluate_loo(items, cfg, ModelKind::Logistic);
    CHECK(r.metrics.accuracy == 1.0);
    CHECK(r.confusion.total() == 4);

    std::vector<LabeledVector> flat;
    for (int i = 0; i < 10; ++i) flat.push_back(lifted(1, 1, i % 2 ? Label::Buggy : Label::NotBuggy, 4));
    const auto f = evaluate_loo(flat, cfg, ModelKind::Logistic);
    CHECK(f.confusion.total() == 10);
    CHECK(f.metrics.accuracy <= 0.5);

    CHECK_THROWS_AS(evaluate_loo(std::span(items).first(2), cfg, ModelKind::Logistic), Error);
}

TEST_CASE("80/20 evaluation report") {
    std::vector<LabeledVector> items;
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        const bool buggy = i % 2;
        items.push_back(lifted(rng.uniform(-1, 1) + (buggy ? 4 : 0), rng.uniform(-1, 1), buggy ? Label::Buggy : Label::NotBuggy, 6));
    }
    const auto r = evaluate_split(items, 0.8, small_cfg(), ModelKind::Mlp);
    CHECK(r.n_train == 40);
    CHECK(r.n_test == 10);
    CHECK(r.confusion.total() == 10);
    CHECK(r.metrics.f1 == 1.0);
}

TEST_CASE("gradient checks") {
    Rng rng(17);
    for (int s = 0; s < 5; ++s) {
        std::vector<double> x(32);
        for (auto& e : x) e = rng.normal();
        TrainConfig cfg;
        cfg.hidden_units = 8;
        cfg.seed = static_cast<std::uint64_t>(s);
        const auto label = s % 2 ? Label::Buggy : Label::NotBuggy;
        CHECK(gradient_check(ModelKind::Logistic, x, label, cfg) <= 1e-6);
        const auto mlp = gradient_check_detail(ModelKind::Mlp, x, label, cfg);
        CHECK(mlp.max_relative_error <= 1e-4);
        CHECK(mlp.indices.size() >= 50);
    }
    // Zero input: input-weight gradients vanish exactly (without L2 pull).
    TrainConfig cfg;
    cfg.l2 = 0.0;
    const auto g = gradient_check_detail(ModelKind::Logistic, std::vector<double>(64, 0.0), Label::Buggy, cfg);
    for (std::size_t k = 0; k < g.indices.size(); ++k)
        if (g.indices[k] < 64) CHECK(g.analytic[k] == 0.0);
}
