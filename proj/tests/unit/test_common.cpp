#include "support/fixture.hpp"
#include "untangle/error.hpp"
#include "untangle/hashing.hpp"
#include "untangle/io.hpp"
#include "untangle/label.hpp"
#include "untangle/process.hpp"
#include "untangle/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace untangle;

TEST_CASE("sha256 matches the FIPS 180-2 test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("file digest equals digest of the bytes") {
    fixture::TempDir dir;
    write_file(dir / "x.txt", "hello\n");
    CHECK(sha256_file_hex((dir / "x.txt").string()) == sha256_hex("hello\n"));
}

TEST_CASE("labels parse case-insensitively and invert") {
    CHECK(parse_label("buggy") == Label::Buggy);
    CHECK(parse_label("NOTBUGGY") == Label::NotBuggy);
    CHECK(parse_label("Unparseable") == Label::Unparseable);
    CHECK_FALSE(parse_label("maybe").has_value());
    CHECK(invert(Label::Buggy) == Label::NotBuggy);
    CHECK(invert(Label::Unparseable) == Label::Unparseable);
    CHECK(to_string(Label::NotBuggy) == "NotBuggy");
}

TEST_CASE("errors carry their code in the message") {
    const Error e(ErrorCode::UnknownChange, "abc");
    CHECK(e.code() == ErrorCode::UnknownChange);
    CHECK(std::string(e.what()) == "UnknownChange: abc");
    CHECK(is_validation_error(ErrorCode::InvalidLabel));
    CHECK_FALSE(is_validation_error(ErrorCode::ProviderUnavailable));
    CHECK_FALSE(is_validation_error(ErrorCode::IoFailure));
}

TEST_CASE("csv quoting and parsing round-trip") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    const std::string doc = "x,y\n\"a,b\",\"line1\nline2\"\n\"q\"\"q\",z\n";
    const auto rows = parse_csv(doc);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][0] == "a,b");
    CHECK(rows[1][1] == "line1\nline2");
    CHECK(rows[2][0] == "q\"q");
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("jsonl read/write and atomic write") {
    fixture::TempDir dir;
    const std::vector<json> rows{{{"a", 1}}, {{"b", "x"}}};
    write_file(dir / "r.jsonl", to_jsonl(rows));
    const auto back = read_jsonl(dir / "r.jsonl");
    CHECK(back == rows);
    CHECK_THROWS_AS(read_file(dir / "missing"), Error);
    write_file(dir / "bad.jsonl", "{\"a\":1}\nnot json\n");
    CHECK_THROWS_AS(read_jsonl(dir / "bad.jsonl"), Error);
}

TEST_CASE("trim and lower") {
    CHECK(trim("  a b \n") == "a b");
    CHECK(to_lower("AbC") == "abc");
}

TEST_CASE("rng is deterministic and in range") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs |= x != c.next();
    }
    CHECK(differs);
    Rng r(7);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        ++counts[r.below(5)];
    }
    for (int n : counts) CHECK(n > 850);
    std::vector<int> items{1, 2, 3, 4, 5, 6};
    r.shuffle(std::span<int>(items));
    std::sort(items.begin(), items.end());
    CHECK(items == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("process runner captures output and exit status") {
    const auto ok = run_process({"sh", "-c", "echo out; echo err >&2; exit 3"});
    CHECK(ok.exit_code == 3);
    CHECK(ok.out == "out\n");
    CHECK(ok.err == "err\n");
    const auto missing = run_process({"definitely-not-a-real-binary-xyz"});
    CHECK(missing.exit_code != 0);
}
