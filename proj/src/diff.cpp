#include "untangle/diff.hpp"

#include "untangle/error.hpp"

#include <algorithm>
#include <cstdint>

namespace untangle {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        lines.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::string normalize_source(std::string_view text) {
    std::string out;
    bool prev_blank = false;
    for (auto& line : split_lines(text)) {
        std::size_t end = line.size();
        while (end > 0 && (line[end - 1] == ' ' || line[end - 1] == '\t' || line[end - 1] == '\r' ||
                           line[end - 1] == '\f' || line[end - 1] == '\v'))
            --end;
        line.resize(end);
        const bool blank = line.empty();
        if (blank && prev_blank) continue;
        prev_blank = blank;
        out += line;
        out += '\n';
    }
    return out;
}

namespace {

enum class Op : std::uint8_t { Keep, Del, Add };

std::string range(std::size_t count) {
    if (count == 0) return "0,0";
    if (count == 1) return "1";
    return "1," + std::to_string(count);
}

}  // namespace

std::string compute_method_diff(std::string_view before_source, std::string_view after_source) {
    const std::string before = normalize_source(before_source);
    const std::string after = normalize_source(after_source);
    if (before == after) throw Error(ErrorCode::NoChange, "sources are identical after normalization");

    const auto a = split_lines(before);
    const auto b = split_lines(after);
    const std::size_t n = a.size();
    const std::size_t m = b.size();

    // Suffix LCS table; method bodies are small enough for O(n*m).
    std::vector<std::uint32_t> lcs((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return lcs[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            at(i, j) = a[i] == b[j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));

    std::vector<std::pair<Op, const std::string*>> script;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i] == b[j] && at(i, j) == at(i + 1, j + 1) + 1) {
            script.emplace_back(Op::Keep, &a[i]);
            ++i;
            ++j;
        } else if (j >= m || (i < n && at(i + 1, j) >= at(i, j + 1))) {
            script.emplace_back(Op::Del, &a[i]);
            ++i;
        } else {
            script.emplace_back(Op::Add, &b[j]);
            ++j;
        }
    }
    // Within each changed region, emit deletions before additions.
    for (std::size_t k = 0; k < script.size();) {
        if (script[k].first == Op::Keep) {
            ++k;
            continue;
        }
        std::size_t e = k;
        while (e < script.size() && script[e].first != Op::Keep) ++e;
        std::stable_partition(script.begin() + static_cast<std::ptrdiff_t>(k),
                              script.begin() + static_cast<std::ptrdiff_t>(e),
                              [](const auto& op) { return op.first == Op::Del; });
        k = e;
    }

    std::string out = "@@ -" + range(n) + " +" + range(m) + " @@\n";
    for (const auto& [op, line] : script) {
        out += op == Op::Keep ? ' ' : op == Op::Del ? '-' : '+';
        out += *line;
        out += '\n';
    }
    return out;
}

}  // namespace untangle
