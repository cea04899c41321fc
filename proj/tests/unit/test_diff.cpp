#include "support/fixture.hpp"
#include "untangle/diff.hpp"
#include "untangle/error.hpp"

#include <doctest.h>

#include <algorithm>

using namespace untangle;

namespace {

std::size_t count_prefixed(const std::string& diff, char prefix) {
    std::size_t n = 0;
    for (const auto& line : split_lines(diff))
        if (!line.empty() && line[0] == prefix && line.rfind("@@", 0) != 0) ++n;
    return n;
}

// GNU diff with the whole file as context, headers dropped.
std::string gnu_diff(const std::string& a, const std::string& b) {
    fixture::TempDir dir;
    write_file(dir / "a", normalize_source(a));
    write_file(dir / "b", normalize_source(b));
    const auto r = run_process({"diff", "-U", "100000", (dir / "a").string(), (dir / "b").string()});
    REQUIRE(r.exit_code == 1);
    const auto hunk = r.out.find("@@");
    return r.out.substr(hunk);
}

}  // namespace

TEST_CASE("identical sources raise NoChange") {
    const std::string m = "void f() {\n    g();\n}\n";
    CHECK_THROWS_AS(compute_method_diff(m, m), Error);
    try {
        compute_method_diff(m, m + "\n\n");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoChange);
    }
}

TEST_CASE("whitespace-only churn is no change") {
    // Trailing blanks go, blank-line runs shrink to one.
    CHECK_THROWS_AS(compute_method_diff("void f() {\n    g();\n\n}\n", "void f() {   \n    g();\t\n\n\n\n}\n"), Error);
    // A single new blank line survives normalization.
    CHECK_NOTHROW(compute_method_diff("void f() {\n    g();\n}\n", "void f() {\n    g();\n\n}\n"));
}

TEST_CASE("one-line edit gives one - and one + line") {
    const auto d = compute_method_diff("int f() {\n    return 1;\n}\n", "int f() {\n    return 2;\n}\n");
    CHECK(count_prefixed(d, '-') == 1);
    CHECK(count_prefixed(d, '+') == 1);
    CHECK(d == "@@ -1,3 +1,3 @@\n int f() {\n-    return 1;\n+    return 2;\n }\n");
}

TEST_CASE("appended statement gives one + line and no - lines") {
    const std::string before = "void f() {\n    a();\n}\n";
    const std::string after = "void f() {\n    a();\n    b();\n}\n";
    const auto d = compute_method_diff(before, after);
    CHECK(count_prefixed(d, '+') == 1);
    CHECK(count_prefixed(d, '-') == 0);
    CHECK(d == gnu_diff(before, after));
}

TEST_CASE("agrees with GNU diff on multi-region edits") {
    const std::string before =
        "int f(int x) {\n    int a = x;\n    int b = a * 2;\n    log(a);\n    if (b > 3) {\n        return b;\n    }\n"
        "    return 0;\n}\n";
    const std::string after =
        "int f(int x) {\n    int a = x + 1;\n    int b = a * 2;\n    if (b > 3) {\n        trace(b);\n"
        "        return b;\n    }\n    return -1;\n}\n";
    CHECK(compute_method_diff(before, after) == gnu_diff(before, after));
}

TEST_CASE("diff is stable across runs") {
    const std::string a = "void f() {\n    x();\n}\n";
    const std::string b = "void f() {\n    y();\n    z();\n}\n";
    CHECK(compute_method_diff(a, b) == compute_method_diff(a, b));
}

TEST_CASE("normalization") {
    CHECK(normalize_source("a  \n\n\n\nb\t\n") == "a\n\nb\n");
    CHECK(normalize_source("x") == "x\n");
    CHECK(split_lines("a\nb\n") == std::vector<std::string>{"a", "b"});
}
