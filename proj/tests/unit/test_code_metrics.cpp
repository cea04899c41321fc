#include "support/fixture.hpp"
#include "untangle/code_metrics.hpp"
#include "untangle/diff.hpp"
#include "untangle/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace untangle;

namespace {

const std::string kGuard =
    "int f(int a) {\n"
    "    // guard\n"
    "    if (a > 0) {\n"
    "        return a;\n"
    "    }\n"
    "    return -a;\n"
    "}\n";

const std::string kBusy =
    "public List<String> collect(Map<String, Integer> m) throws IOException {\n"
    "    List<String> out = new ArrayList<>();\n"
    "    for (Map.Entry<String, Integer> e : m.entrySet()) {\n"
    "        if (e.getValue() > 0 && !skip(e.getKey())) {\n"
    "            out.add(e.getKey());\n"
    "        } else if (e.getValue() < 0 || strict) {\n"
    "            log.warn(\"negative\");\n"
    "        }\n"
    "    }\n"
    "    try {\n"
    "        flush(out);\n"
    "    } catch (IOException ex) {\n"
    "        throw ex;\n"
    "    }\n"
    "    return out.isEmpty() ? null : out;\n"
    "}\n";

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Inserts comments between lines and at line ends without touching code.
std::string with_comments(const std::string& src, Rng& rng) {
    std::string out;
    for (const auto& line : split_lines(src)) {
        if (rng.below(2)) out += "    // if (x) call(y) && z || w ? 1 : 2\n";
        out += line;
        if (rng.below(2) && line.find("//") == std::string::npos) out += " /* while (true) go(); */";
        out += "\n";
    }
    return out;
}

std::string with_ifs(const std::string& src, int k) {
    const auto end = src.rfind('}');
    std::string extra;
    for (int i = 0; i < k; ++i) extra += "    if (c" + std::to_string(i) + ") {\n        n++;\n    }\n";
    return src.substr(0, end) + extra + src.substr(end);
}

}  // namespace

TEST_CASE("sloc") {
    CHECK(sloc("int x = 1;\n\n// note\nint y = 2;\n") == 2);
    CHECK(sloc("") == 0);
    CHECK(sloc("int x = 1; // init\n") == 1);
    CHECK(sloc("/* a\n b\n */ int z;\n") == 1);
    CHECK(sloc(kGuard) == 6);
}

TEST_CASE("mccabe") {
    CHECK(mccabe("void f() {\n    a();\n    b();\n}\n") == 1);
    CHECK(mccabe("void f() {\n    if (a) x();\n    for (;;) y();\n}\n") == 3);
    CHECK(mccabe("void f() {\n    if (a && b) {\n        x();\n    }\n}\n") == 3);
    CHECK(mccabe("void f() {\n    do {\n        x();\n    } while (c);\n}\n") == 2);
    CHECK(mccabe("void f() {\n    while (c) {\n        x();\n    }\n}\n") == 2);
    CHECK(mccabe("void f(List<?> l) {\n    int y = a ? 1 : 2;\n}\n") == 2);
    CHECK(mccabe("void f() {\n    switch (k) {\n        case 1: a(); break;\n        case 2: b(); break;\n"
                 "        default: c();\n    }\n}\n") == 3);
    // for, if, &&, else if, ||, catch, ?:
    CHECK(mccabe(kBusy) == 8);
}

TEST_CASE("fan-out") {
    CHECK(fan_out("void f() {\n    a();\n    b();\n    a();\n}\n") == 2);
    CHECK(fan_out("void f() {\n    int x = 1;\n}\n") == 0);
    CHECK(fan_out("void f() {\n    x.foo().bar();\n}\n") == 2);
    CHECK(fan_out("void f() {\n    a(1);\n    a(1, 2);\n}\n") == 1);
    CHECK(fan_out("void f() {\n    if (x) while (y) { }\n    Object o = new Foo(1);\n}\n") == 1);
    // collect itself is a declaration; @Override is an annotation.
    CHECK(fan_out("@Override\npublic void collect(int a) throws E {\n    sync();\n}\n") == 1);
    // entrySet getValue skip getKey add log.warn flush isEmpty ArrayList
    CHECK(fan_out(kBusy) == 9);
}

TEST_CASE("halstead") {
    const auto c = halstead_counts("a = b + c;");
    CHECK(c.distinct_operators == 3);
    CHECK(c.distinct_operands == 3);
    CHECK(c.total_operators == 3);
    CHECK(c.total_operands == 3);
    CHECK(halstead_volume("a = b + c;") == doctest::Approx(6 * std::log2(6.0)).epsilon(1e-15));
    CHECK(halstead_volume("x") == 0.0);
    CHECK(halstead_volume("a = b + c;\na = b + c;") == doctest::Approx(2 * halstead_volume("a = b + c;")));
    const auto k = halstead_counts("return true ? null : 3;");
    CHECK(k.distinct_operands == 3);
    CHECK(k.distinct_operators == 4);
}

TEST_CASE("maintainability index") {
    CHECK(maintainability_index(100, 2, 10) ==
          doctest::Approx(171 - 5.2 * std::log(100.0) - 0.46 - 16.2 * std::log(10.0)).epsilon(1e-14));
    CHECK(maintainability_index(100, 2, 10) == doctest::Approx(109.29).epsilon(1e-4));
    CHECK(maintainability_index(0.5, 1, 1) == doctest::Approx(170.77).epsilon(1e-14));
    CHECK(maintainability_index(1e300, 1000, 1000000) == 0.0);
    CHECK_THROWS_AS(maintainability_index(10, 1, 0), Error);
    CHECK_THROWS_AS(maintainability_index("// only a comment\n"), Error);
}

TEST_CASE("readability surrogate") {
    CHECK(readability("") == sigmoid(4.0));
    // Hand counts for kGuard: 7 non-blank lines of lengths 14,12,16,17,5,14,1;
    // identifiers f,a,a,a,a; one `if`; one comment line.
    const auto f = readability_features(kGuard);
    CHECK(f.avg_line_length == doctest::Approx(79.0 / 7));
    CHECK(f.max_line_length == 17);
    CHECK(f.avg_identifier_length == 1.0);
    CHECK(f.branch_keyword_density == doctest::Approx(1.0 / 7));
    CHECK(f.comment_density == doctest::Approx(1.0 / 7));
    const double golden = sigmoid(4 - 0.05 * 79.0 / 7 - 0.01 * 17 - 0.1 * 1 - 2.0 / 7 + 1.0 / 7);
    CHECK(readability(kGuard) == doctest::Approx(golden).epsilon(1e-14));
    CHECK(readability(kGuard) == doctest::Approx(0.9535961196).epsilon(1e-9));

    for (const auto* src : {&kGuard, &kBusy}) {
        std::string longer;
        for (const auto& line : split_lines(*src)) longer += line + std::string(60, ' ') + "\n";
        CHECK(readability(longer) < readability(*src));
    }
    ReadabilityWeights w;
    w.w0 = 0;
    w.w1 = w.w2 = w.w3 = w.w4 = w.w5 = 0;
    CHECK(readability(kBusy, w) == 0.5);
}

TEST_CASE("comment insertion leaves counts unchanged") {
    Rng rng(31);
    for (const auto* src : {&kGuard, &kBusy}) {
        const auto base = compute_metrics(*src);
        for (int i = 0; i < 25; ++i) {
            const auto commented = with_comments(*src, rng);
            CHECK(sloc(commented) == base.size);
            CHECK(mccabe(commented) == base.mccabe);
            CHECK(fan_out(commented) == base.fan_out);
        }
    }
}

TEST_CASE("k independent if-blocks add k to mccabe") {
    for (const auto* src : {&kGuard, &kBusy})
        for (int k = 0; k < 6; ++k) CHECK(mccabe(with_ifs(*src, k)) == mccabe(*src) + k);
}

TEST_CASE("metrics are pure and bounded") {
    const auto a = compute_metrics(kBusy);
    const auto b = compute_metrics(kBusy);
    CHECK(to_json(a) == to_json(b));
    CHECK(a.mccabe >= 1);
    CHECK(a.readability > 0.0);
    CHECK(a.readability < 1.0);
    CHECK(a.mi >= 0.0);
    CHECK(a.size == 16);
    const auto empty = compute_metrics("");
    CHECK(empty.size == 0);
    CHECK(empty.mi == 0.0);
    CHECK(empty.mccabe == 1);
}

TEST_CASE("metrics CSV round-trip") {
    std::vector<MetricsRow> rows{{"p/src/A.java::A.f()", "p", compute_metrics(kGuard)},
                                 {"p/src/A.java::A.g(int,String)", "p", compute_metrics(kBusy)}};
    const auto csv = metrics_csv(rows);
    CHECK(csv.rfind("method_id,project,size,readability,mccabe,fan_out,mi\n", 0) == 0);
    const auto back = parse_metrics_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[1].method_id == rows[1].method_id);
    CHECK(back[1].metrics.mccabe == rows[1].metrics.mccabe);
    CHECK(back[0].metrics.readability == rows[0].metrics.readability);
    CHECK(back[0].metrics.mi == rows[0].metrics.mi);
    CHECK_THROWS_AS(parse_metrics_csv("method_id,project\nx,y\n"), Error);
}
