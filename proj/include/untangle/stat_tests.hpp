#pragma once

#include "untangle/io.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace untangle {

enum class TestMethod { Exact, NormalApprox };
std::string_view to_string(TestMethod method) noexcept;

struct TestResult {
    double u_statistic = 0.0;  // U of the first sample
    std::optional<double> z;   // normal approximation only
    double p_two_sided = 1.0;
    TestMethod method = TestMethod::NormalApprox;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
};

enum class EffectCategory { Negligible, Small, Medium, Large };
std::string_view to_string(EffectCategory category) noexcept;

struct EffectSize {
    double delta = 0.0;
    EffectCategory category = EffectCategory::Negligible;
};

inline constexpr std::size_t kExactLimit = 12;  // n1 + n2

// Average ranks (1-based) of the pooled values, ties sharing their mean rank.
std::vector<double> midranks(std::span<const double> values);

// Wilcoxon rank-sum / Mann-Whitney U. Exact distribution when
// n1 + n2 <= 12 and there are no ties; otherwise the normal approximation
// with tie-corrected variance and continuity correction. Throws EmptyInput.
TestResult rank_sum_test(std::span<const double> a, std::span<const double> b);

// Exact two-sided p for an observed U (no ties): 2 * min tail, capped at 1.
double exact_rank_sum_p(std::size_t n1, std::size_t n2, double u);

// Normal approximation regardless of sample size.
TestResult rank_sum_normal(std::span<const double> a, std::span<const double> b);

// (#{a_i > b_j} - #{a_i < b_j}) / (n1 * n2), computed by sorting.
EffectSize cliffs_delta(std::span<const double> a, std::span<const double> b);

// Hess thresholds on |delta|: < 0.147, < 0.33, < 0.474, else Large.
// Throws OutOfRange when |delta| > 1 or delta is NaN.
EffectCategory categorize_effect(double delta);

json to_json(const TestResult& result);
json to_json(const EffectSize& effect);

}  // namespace untangle
