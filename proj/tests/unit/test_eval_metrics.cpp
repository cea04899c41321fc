#include "untangle/error.hpp"
#include "untangle/eval_metrics.hpp"
#include "untangle/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace untangle;

namespace {

constexpr Label B = Label::Buggy;
constexpr Label N = Label::NotBuggy;

ConfusionMatrix cm(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn) { return {tp, fp, fn, tn}; }

}  // namespace

TEST_CASE("confusion counts") {
    CHECK(confusion(std::vector<Label>{B, B, N, N}, std::vector<Label>{B, B, N, N}) == cm(2, 0, 0, 2));
    CHECK(confusion(std::vector<Label>{N, N, B, B}, std::vector<Label>{B, B, N, N}) == cm(0, 2, 2, 0));
    // 20 items tallied by hand: 6 tp, 3 fp, 4 fn, 7 tn.
    const std::vector<Label> pred{B, B, B, B, B, B, B, B, B, N, N, N, N, N, N, N, N, N, N, N};
    const std::vector<Label> truth{B, B, B, B, B, B, N, N, N, B, B, B, B, N, N, N, N, N, N, N};
    CHECK(confusion(pred, truth) == cm(6, 3, 4, 7));
    CHECK(confusion(pred, truth, N) == cm(7, 4, 3, 6));
    CHECK_THROWS_AS(confusion(std::vector<Label>{B}, std::vector<Label>{B, N}), Error);
    CHECK_THROWS_AS(confusion(std::vector<Label>{}, std::vector<Label>{}), Error);
    CHECK_THROWS_AS(confusion(std::vector<Label>{Label::Unparseable}, std::vector<Label>{B}), Error);
}

TEST_CASE("closed-form examples") {
    const auto perfect = classification_metrics(cm(2, 0, 0, 2));
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.mcc == 1.0);
    CHECK_FALSE(perfect.degenerate);

    CHECK(classification_metrics(cm(0, 2, 2, 0)).mcc == -1.0);

    const auto r = classification_metrics(cm(9, 1, 2, 8));
    CHECK(r.precision == 0.9);
    CHECK(r.recall == 9.0 / 11.0);
    CHECK(r.f1 == doctest::Approx(18.0 / 21.0).epsilon(1e-15));
    CHECK(r.mcc == doctest::Approx(70.0 / std::sqrt(9900.0)).epsilon(1e-15));
    CHECK(r.accuracy == 0.85);
}

TEST_CASE("0/0 ratios are zero and flagged") {
    const auto r = classification_metrics(cm(0, 0, 0, 5));
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
    CHECK(r.mcc == 0.0);
    CHECK(r.degenerate);
    CHECK(r.accuracy == 1.0);
    CHECK_THROWS_AS(classification_metrics(cm(0, 0, 0, 0)), Error);
}

TEST_CASE("mcc symmetry and antisymmetry") {
    Rng rng(21);
    for (int i = 0; i < 300; ++i) {
        std::vector<Label> p, t;
        const auto n = 4 + rng.below(40);
        for (std::uint64_t k = 0; k < n; ++k) {
            p.push_back(rng.below(2) ? B : N);
            t.push_back(rng.below(2) ? B : N);
        }
        const auto m = classification_metrics(confusion(p, t)).mcc;
        CHECK(classification_metrics(confusion(t, p)).mcc == doctest::Approx(m).epsilon(1e-12));
        std::vector<Label> inv;
        for (auto l : p) inv.push_back(l == B ? N : B);
        CHECK(classification_metrics(confusion(inv, t)).mcc == doctest::Approx(-m).epsilon(1e-12));
        CHECK(m >= -1.0);
        CHECK(m <= 1.0);
    }
}

TEST_CASE("unparseable predictions are counted and dropped") {
    const std::vector<Label> p{B, Label::Unparseable, N, Label::Unparseable};
    const std::vector<Label> t{B, B, N, N};
    const auto s = score_predictions(p, t);
    CHECK(s.matrix == cm(1, 0, 0, 1));
    CHECK(s.metrics.unparseable_count == 2);
    CHECK(s.metrics.f1 == 1.0);
    const auto j = to_json(s.metrics);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    CHECK(keys == std::vector<std::string>{"accuracy", "f1", "mcc", "precision", "recall", "unparseable_count"});
}
