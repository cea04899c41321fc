#pragma once

#include "untangle/io.hpp"
#include "untangle/method_parser.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace untangle {

struct CommitRecord {
    std::string commit_id;
    std::string message;
    std::string author;
    std::int64_t timestamp = 0;
    bool is_bugfix = false;
    std::vector<std::string> files_touched;
    std::string parent_id;  // first parent; empty for root commits
};

// Regex rules deciding whether a commit message describes a bug fix.
//
// Defaults: case-insensitive whole-word "fix", "bug", "defect", "fault",
// "patch", or an issue reference "#<digits>". A message is a bug fix iff
// any rule matches.
class BugfixRules {
public:
    BugfixRules();
    explicit BugfixRules(const std::vector<std::string>& patterns);

    // One ECMAScript regex per non-empty line, matched case-insensitively.
    static BugfixRules from_file(const std::filesystem::path& path);

    bool matches(std::string_view message) const;
    const std::vector<std::string>& patterns() const { return patterns_; }

private:
    std::vector<std::string> patterns_;
    std::vector<std::regex> compiled_;
};

struct MethodChange {
    std::string change_id;
    CommitRecord commit;
    std::string file_path;
    std::string method_signature;
    std::optional<std::string> before_source;
    std::optional<std::string> after_source;
    std::string diff_text;
    int methods_in_commit = 1;

    // Method identity across revisions.
    std::string method_key() const { return file_path + "::" + method_signature; }
};

struct SkippedFile {
    std::string commit_id;
    std::string file_path;
    std::string reason;
};

struct ExtractResult {
    std::vector<MethodChange> changes;
    std::vector<SkippedFile> skipped;
};

struct MiningResult {
    std::vector<CommitRecord> commits;
    std::vector<MethodChange> changes;
    std::vector<SkippedFile> skipped;
};

std::string make_change_id(std::string_view commit_id, std::string_view file_path, std::string_view signature);

// One record per commit reachable from HEAD, parents before children.
// Throws Error{RepoNotFound}. Commits whose objects cannot be read are
// logged to stderr and skipped.
std::vector<CommitRecord> scan_commits(const std::filesystem::path& repo_path, const BugfixRules& rules = {});

// Method-level changes of one commit against its first parent, ordered by
// (file path, signature). Unparsable files land in the skip report.
ExtractResult extract_method_changes(const CommitRecord& commit, const std::filesystem::path& repo_path,
                                     const ParserConfig& parser_cfg = {});

// Pure variant over in-memory revisions; used by extract_method_changes and
// directly testable. `files` holds (path, before text or absent, after text or absent).
struct FileRevision {
    std::string path;
    std::optional<std::string> before;
    std::optional<std::string> after;
};
ExtractResult diff_revisions(const CommitRecord& commit, const std::vector<FileRevision>& files,
                             const ParserConfig& parser_cfg = {});

MiningResult mine_repository(const std::filesystem::path& repo_path, const BugfixRules& rules = {},
                             const ParserConfig& parser_cfg = {});

// JSONL wire format: change_id, commit_id, message, timestamp, file_path,
// signature, before, after, diff, methods_in_commit, is_bugfix.
json to_json(const MethodChange& change);
MethodChange method_change_from_json(const json& row);

std::vector<MethodChange> read_method_changes(const std::filesystem::path& path);

}  // namespace untangle
