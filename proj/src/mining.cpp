#include "untangle/mining.hpp"

#include "untangle/diff.hpp"
#include "untangle/error.hpp"
#include "untangle/hashing.hpp"
#include "untangle/process.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <map>
#include <set>

namespace untangle {

namespace {

const std::vector<std::string> kDefaultRules = {R"(\b(fix|bug|defect|fault|patch)\b)", R"(#[0-9]+)"};

ProcessResult git(const std::filesystem::path& repo, std::vector<std::string> args) {
    std::vector<std::string> argv{"git", "-C", repo.string()};
    argv.insert(argv.end(), std::make_move_iterator(args.begin()), std::make_move_iterator(args.end()));
    return run_process(argv);
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(sep, pos);
        if (end == std::string_view::npos) end = text.size();
        parts.emplace_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return parts;
}

std::string rtrim(std::string text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    return text;
}

std::optional<std::string> read_blob(const std::filesystem::path& repo, const std::string& rev,
                                     const std::string& path) {
    if (rev.empty()) return std::nullopt;
    auto r = git(repo, {"cat-file", "blob", rev + ":" + path});
    if (r.exit_code != 0) return std::nullopt;
    return std::move(r.out);
}

}  // namespace

BugfixRules::BugfixRules() : BugfixRules(kDefaultRules) {}

BugfixRules::BugfixRules(const std::vector<std::string>& patterns) : patterns_(patterns) {
    for (const auto& p : patterns_) {
        try {
            compiled_.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
        } catch (const std::regex_error& e) {
            throw Error(ErrorCode::InvalidArgument, "bad bug-fix rule '" + p + "': " + e.what());
        }
    }
}

BugfixRules BugfixRules::from_file(const std::filesystem::path& path) {
    std::vector<std::string> patterns;
    for (const auto& line : split(read_file(path), '\n')) {
        auto t = trim(line);
        if (!t.empty()) patterns.push_back(std::move(t));
    }
    return BugfixRules(patterns);
}

bool BugfixRules::matches(std::string_view message) const {
    const std::string msg(message);
    return std::any_of(compiled_.begin(), compiled_.end(),
                       [&](const std::regex& re) { return std::regex_search(msg, re); });
}

std::string make_change_id(std::string_view commit_id, std::string_view file_path, std::string_view signature) {
    std::string key;
    key.reserve(commit_id.size() + file_path.size() + signature.size() + 2);
    key.append(commit_id).push_back('\0');
    key.append(file_path).push_back('\0');
    key.append(signature);
    return sha256_hex(key).substr(0, 16);
}

std::vector<CommitRecord> scan_commits(const std::filesystem::path& repo_path, const BugfixRules& rules) {
    std::error_code ec;
    if (!std::filesystem::is_directory(repo_path, ec))
        throw Error(ErrorCode::RepoNotFound, repo_path.string() + " is not a directory");
    if (git(repo_path, {"rev-parse", "--git-dir"}).exit_code != 0)
        throw Error(ErrorCode::RepoNotFound, repo_path.string() + " is not a git repository");
    if (git(repo_path, {"rev-parse", "--verify", "-q", "HEAD"}).exit_code != 0) return {};

    auto log = git(repo_path, {"log", "--topo-order", "--reverse", "-z", "--format=%H%x1f%P%x1f%an%x1f%at%x1f%B", "HEAD"});
    if (log.exit_code != 0) throw Error(ErrorCode::CorruptObject, "git log failed: " + log.err);

    std::vector<CommitRecord> commits;
    for (const auto& entry : split(log.out, '\0')) {
        if (entry.empty()) continue;
        auto fields = split(entry, '\x1f');
        if (fields.size() < 5) continue;
        CommitRecord rec;
        rec.commit_id = trim(fields[0]);
        const auto parents = split(trim(fields[1]), ' ');
        rec.parent_id = parents.empty() ? "" : parents.front();
        rec.author = fields[2];
        try {
            rec.timestamp = std::max<std::int64_t>(0, std::stoll(fields[3]));
        } catch (const std::exception&) {
            rec.timestamp = 0;
        }
        // Messages may contain the field separator; re-join the tail.
        std::string message = fields[4];
        for (std::size_t k = 5; k < fields.size(); ++k) message += '\x1f' + fields[k];
        rec.message = rtrim(std::move(message));
        rec.is_bugfix = rules.matches(rec.message);

        std::vector<std::string> args{"diff-tree", "--no-commit-id", "-r", "--name-only", "-z"};
        if (rec.parent_id.empty()) {
            args.emplace_back("--root");
            args.push_back(rec.commit_id);
        } else {
            args.push_back(rec.parent_id);
            args.push_back(rec.commit_id);
        }
        auto files = git(repo_path, args);
        if (files.exit_code != 0) {
            std::cerr << "untangle: skipping commit " << rec.commit_id << " (CorruptObject): " << files.err;
            continue;
        }
        for (auto& f : split(files.out, '\0'))
            if (!f.empty()) rec.files_touched.push_back(std::move(f));
        std::sort(rec.files_touched.begin(), rec.files_touched.end());
        commits.push_back(std::move(rec));
    }
    return commits;
}

ExtractResult diff_revisions(const CommitRecord& commit, const std::vector<FileRevision>& files,
                             const ParserConfig& parser_cfg) {
    ExtractResult result;
    std::vector<const FileRevision*> ordered;
    for (const auto& f : files) ordered.push_back(&f);
    std::sort(ordered.begin(), ordered.end(), [](auto* x, auto* y) { return x->path < y->path; });

    for (const FileRevision* file : ordered) {
        std::map<std::string, MethodDecl> before;
        std::map<std::string, MethodDecl> after;
        try {
            if (file->before)
                for (auto& m : parse_methods(*file->before, parser_cfg)) before.emplace(m.signature, std::move(m));
            if (file->after)
                for (auto& m : parse_methods(*file->after, parser_cfg)) after.emplace(m.signature, std::move(m));
        } catch (const Error& e) {
            result.skipped.push_back({commit.commit_id, file->path, e.what()});
            continue;
        }
        std::set<std::string> signatures;
        for (const auto& [sig, _] : before) signatures.insert(sig);
        for (const auto& [sig, _] : after) signatures.insert(sig);

        for (const auto& sig : signatures) {
            auto b = before.find(sig);
            auto a = after.find(sig);
            std::optional<std::string> before_src;
            std::optional<std::string> after_src;
            if (b != before.end()) before_src = b->second.source;
            if (a != after.end()) after_src = a->second.source;
            if (before_src && after_src && normalize_source(*before_src) == normalize_source(*after_src)) continue;

            MethodChange change;
            change.commit = commit;
            change.file_path = file->path;
            change.method_signature = sig;
            change.change_id = make_change_id(commit.commit_id, file->path, sig);
            change.before_source = std::move(before_src);
            change.after_source = std::move(after_src);
            change.diff_text = compute_method_diff(change.before_source.value_or(""), change.after_source.value_or(""));
            result.changes.push_back(std::move(change));
        }
    }
    const int count = static_cast<int>(result.changes.size());
    for (auto& c : result.changes) c.methods_in_commit = count;
    return result;
}

ExtractResult extract_method_changes(const CommitRecord& commit, const std::filesystem::path& repo_path,
                                     const ParserConfig& parser_cfg) {
    std::vector<FileRevision> files;
    for (const auto& path : commit.files_touched) {
        if (!parser_cfg.accepts(path)) continue;
        files.push_back({path, read_blob(repo_path, commit.parent_id, path), read_blob(repo_path, commit.commit_id, path)});
    }
    return diff_revisions(commit, files, parser_cfg);
}

MiningResult mine_repository(const std::filesystem::path& repo_path, const BugfixRules& rules,
                             const ParserConfig& parser_cfg) {
    MiningResult out;
    out.commits = scan_commits(repo_path, rules);
    for (const auto& commit : out.commits) {
        auto r = extract_method_changes(commit, repo_path, parser_cfg);
        std::move(r.changes.begin(), r.changes.end(), std::back_inserter(out.changes));
        std::move(r.skipped.begin(), r.skipped.end(), std::back_inserter(out.skipped));
    }
    return out;
}

json to_json(const MethodChange& c) {
    json row;
    row["change_id"] = c.change_id;
    row["commit_id"] = c.commit.commit_id;
    row["message"] = c.commit.message;
    row["timestamp"] = c.commit.timestamp;
    row["file_path"] = c.file_path;
    row["signature"] = c.method_signature;
    row["before"] = c.before_source ? json(*c.before_source) : json(nullptr);
    row["after"] = c.after_source ? json(*c.after_source) : json(nullptr);
    row["diff"] = c.diff_text;
    row["methods_in_commit"] = c.methods_in_commit;
    row["is_bugfix"] = c.commit.is_bugfix;
    return row;
}

MethodChange method_change_from_json(const json& row) {
    try {
        MethodChange c;
        c.change_id = row.at("change_id").get<std::string>();
        c.commit.commit_id = row.at("commit_id").get<std::string>();
        c.commit.message = row.value("message", "");
        c.commit.timestamp = row.value("timestamp", std::int64_t{0});
        c.commit.is_bugfix = row.value("is_bugfix", false);
        c.file_path = row.value("file_path", "");
        c.method_signature = row.value("signature", "");
        if (row.contains("before") && row["before"].is_string()) c.before_source = row["before"].get<std::string>();
        if (row.contains("after") && row["after"].is_string()) c.after_source = row["after"].get<std::string>();
        c.diff_text = row.value("diff", "");
        c.methods_in_commit = row.value("methods_in_commit", 1);
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("malformed method change: ") + e.what());
    }
}

std::vector<MethodChange> read_method_changes(const std::filesystem::path& path) {
    std::vector<MethodChange> out;
    for (const auto& row : read_jsonl(path)) out.push_back(method_change_from_json(row));
    return out;
}

}  // namespace untangle
