#pragma once

#include "untangle/error.hpp"
#include "untangle/hashing.hpp"
#include "untangle/io.hpp"
#include "untangle/mining.hpp"
#include "untangle/process.hpp"
#include "untangle/prompt.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

namespace fixture {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "untangle") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline void must(const untangle::ProcessResult& r, const std::string& what) {
    if (r.exit_code != 0) throw std::runtime_error(what + " failed: " + r.err);
}

inline constexpr std::int64_t kT0 = 1500000000;
inline constexpr std::int64_t kDay = 86400;

// Small scripted repository: initialises, writes files, commits at fixed dates.
class GitRepo {
public:
    explicit GitRepo(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
        git({"init", "-q"});
        git({"config", "user.name", "Fixture"});
        git({"config", "user.email", "fixture@example.com"});
        git({"config", "commit.gpgsign", "false"});
    }

    void write(const std::string& rel, const std::string& text) {
        fs::create_directories((dir_ / rel).parent_path());
        untangle::write_file(dir_ / rel, text);
    }

    void remove(const std::string& rel) { git({"rm", "-q", rel}); }

    void commit(const std::string& message, std::int64_t timestamp) {
        git({"add", "-A"});
        const std::string date = "@" + std::to_string(timestamp) + " +0000";
        must(untangle::run_process({"env", "GIT_AUTHOR_DATE=" + date, "GIT_COMMITTER_DATE=" + date, "git", "-C",
                                    dir_.string(), "commit", "-q", "-m", message}),
             "git commit");
    }

    const fs::path& dir() const { return dir_; }

private:
    void git(std::vector<std::string> args) {
        args.insert(args.begin(), {"git", "-C", dir_.string()});
        must(untangle::run_process(args), "git " + args[3]);
    }

    fs::path dir_;
};

// --- the shared history ---------------------------------------------------------
//
//  day    0  Initial import                 adds Calc {add, sub, div, mul}, Util {format, parse, log}
//  day  100  Refactor logging output        Util.log
//  day  800  Fix bug 101: ...               Calc.div only (single-method fix)
//  day  900  Fix bug 202: ...               Calc.add (the fix) + Calc.sub (rename only)
//  day 1000  Simplify parse                 Util.parse
//  day 1010  Revert parse, add upper        Util.parse, new Util.upper
//  day 1020  Simplify parse again           Util.parse (same diff as day 1000)

inline std::string calc_java(const std::string& add_body, const std::string& sub_body, const std::string& div_body) {
    return "package demo;\n"
           "\n"
           "public class Calc {\n"
           "    public int add(int a, int b) {\n" +
           add_body +
           "    }\n"
           "\n"
           "    public int sub(int a, int b) {\n" +
           sub_body +
           "    }\n"
           "\n"
           "    public int div(int a, int b) {\n" +
           div_body +
           "    }\n"
           "\n"
           "    public int mul(int a, int b) {\n"
           "        return a * b;\n"
           "    }\n"
           "}\n";
}

inline std::string util_java(const std::string& parse_body, const std::string& log_body, bool with_upper) {
    std::string s =
        "package demo;\n"
        "\n"
        "public class Util {\n"
        "    public static String format(String s) {\n"
        "        return \"[\" + s + \"]\";\n"
        "    }\n"
        "\n"
        "    public static String parse(String s) {\n" +
        parse_body +
        "    }\n"
        "\n"
        "    public static void log(String s) {\n" +
        log_body + "    }\n";
    if (with_upper)
        s += "\n"
             "    public static String upper(String s) {\n"
             "        return s.toUpperCase();\n"
             "    }\n";
    return s + "}\n";
}

inline const std::string kAddOld = "        return a + b;\n";
inline const std::string kAddNew = "        return Math.addExact(a, b);\n";
inline const std::string kSubOld = "        int result = a - b;\n        return result;\n";
inline const std::string kSubNew = "        int difference = a - b;\n        return difference;\n";
inline const std::string kDivOld = "        return a / b;\n";
inline const std::string kDivNew = "        if (b == 0) {\n            return 0;\n        }\n        return a / b;\n";
inline const std::string kParseOld = "        return s.trim();\n";
inline const std::string kParseNew = "        return s.strip();\n";
inline const std::string kLogOld = "        System.out.println(s);\n";
inline const std::string kLogNew = "        System.err.println(\"log: \" + s);\n";

inline void build_history_repo(GitRepo& repo) {
    repo.write("src/demo/Calc.java", calc_java(kAddOld, kSubOld, kDivOld));
    repo.write("src/demo/Util.java", util_java(kParseOld, kLogOld, false));
    repo.write("README.txt", "demo\n");
    repo.commit("Initial import", kT0);

    repo.write("src/demo/Util.java", util_java(kParseOld, kLogNew, false));
    repo.commit("Refactor logging output", kT0 + 100 * kDay);

    repo.write("src/demo/Calc.java", calc_java(kAddOld, kSubOld, kDivNew));
    repo.commit("Fix bug 101: division by zero in div", kT0 + 800 * kDay);

    repo.write("src/demo/Calc.java", calc_java(kAddNew, kSubNew, kDivNew));
    repo.commit("Fix bug 202: overflow in add\n\nAlso renames a local in sub.", kT0 + 900 * kDay);

    repo.write("src/demo/Util.java", util_java(kParseNew, kLogNew, false));
    repo.commit("Simplify parse", kT0 + 1000 * kDay);

    repo.write("src/demo/Util.java", util_java(kParseOld, kLogNew, true));
    repo.commit("Revert parse simplification and add upper", kT0 + 1010 * kDay);

    repo.write("src/demo/Util.java", util_java(kParseNew, kLogNew, true));
    repo.commit("Simplify parse again", kT0 + 1020 * kDay);
}

// Ground truth for the shared history: bug-related iff the change fixes the bug.
inline bool truly_buggy(const untangle::MethodChange& c) {
    const auto& sig = c.method_signature;
    if (c.commit.message.rfind("Fix bug 101", 0) == 0) return sig == "Calc.div(int,int)";
    if (c.commit.message.rfind("Fix bug 202", 0) == 0) return sig == "Calc.add(int,int)";
    return false;
}

// Mock responder rows answering every change's prompt with the truth.
inline std::string oracle_responder(const std::vector<untangle::MethodChange>& changes,
                                    untangle::PromptVariant variant,
                                    const std::function<bool(const untangle::MethodChange&)>& truth = truly_buggy) {
    std::string rows;
    std::set<std::string> seen;
    for (const auto& c : changes) {
        untangle::PromptText p;
        try {
            p = untangle::render_prompt(variant, c);
        } catch (const untangle::Error&) {
            continue;
        }
        const auto sha = untangle::sha256_hex(p.text);
        if (!seen.insert(sha).second) continue;
        const std::string label = truth(c) ? "Buggy" : "NotBuggy";
        const std::string response = untangle::expects_reasoning(variant)
                                         ? "The diff is examined against the message.\nFinal answer: " + label
                                         : label;
        rows += untangle::json{{"prompt_sha256", sha}, {"response", response}}.dump() + "\n";
    }
    return rows;
}

// Hand-built change for tests that do not need a repository.
inline untangle::MethodChange make_change(const std::string& commit_id, std::int64_t day, bool bugfix,
                                          const std::string& signature, int methods_in_commit,
                                          const std::string& diff = "", const std::string& message = "") {
    untangle::MethodChange c;
    c.commit.commit_id = commit_id;
    c.commit.timestamp = kT0 + day * kDay;
    c.commit.is_bugfix = bugfix;
    c.commit.message = message.empty() ? (bugfix ? "fix " + commit_id : "change " + commit_id) : message;
    c.commit.author = "Fixture";
    c.file_path = "src/X.java";
    c.method_signature = signature;
    c.before_source = "void " + signature + " {\n}\n";
    c.after_source = "void " + signature + " {\n    work();\n}\n";
    c.diff_text = diff.empty() ? "@@ -1,2 +1,3 @@\n void " + signature + " {\n+    work(" + commit_id + ");\n }\n" : diff;
    c.methods_in_commit = methods_in_commit;
    c.change_id = untangle::make_change_id(commit_id, c.file_path, signature);
    return c;
}

inline std::string test_data(const std::string& rel) { return untangle::read_file(fs::path(UNTANGLE_TEST_DATA) / rel); }

// Two-file commit: ImmutableFieldRule.initializedInConstructor gets a rename
// only, PMD.version gets the version bump.
inline untangle::ExtractResult pmd_commit(const std::string& message = "") {
    untangle::CommitRecord commit;
    commit.commit_id = "5d0e6f3a9b1c2d4e8f7a6b5c4d3e2f1a0b9c8d7e";
    commit.message = message.empty() ? untangle::trim(test_data("fixtures/prompt/message.txt")) : message;
    commit.author = "Fixture";
    commit.timestamp = 1094428800;
    commit.is_bugfix = true;
    commit.parent_id = "0000000000000000000000000000000000000001";
    const std::string dir = "src/net/sourceforge/pmd/";
    commit.files_touched = {dir + "PMD.java", dir + "rules/design/ImmutableFieldRule.java"};
    std::vector<untangle::FileRevision> files{
        {dir + "PMD.java", test_data("fixtures/prompt/PMD.before.java"), test_data("fixtures/prompt/PMD.after.java")},
        {dir + "rules/design/ImmutableFieldRule.java", test_data("fixtures/prompt/ImmutableFieldRule.before.java"),
         test_data("fixtures/prompt/ImmutableFieldRule.after.java")}};
    return untangle::diff_revisions(commit, files);
}

inline untangle::MethodChange pmd_change(const std::string& message = "") {
    for (auto& c : pmd_commit(message).changes)
        if (c.method_signature.find("initializedInConstructor") != std::string::npos) return c;
    throw std::runtime_error("fixture change missing");
}

}  // namespace fixture
