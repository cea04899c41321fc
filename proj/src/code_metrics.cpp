#include "untangle/code_metrics.hpp"

#include "untangle/error.hpp"
#include "untangle/lexer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace untangle {

namespace {

using lex::Token;
using lex::TokenKind;

bool is_literal_keyword(std::string_view t) { return t == "true" || t == "false" || t == "null"; }

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        out.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

bool blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

// Index of the token closing the bracket opened at `open`, or tokens.size().
std::size_t matching(const std::vector<Token>& tokens, std::size_t open, std::string_view o, std::string_view c) {
    int depth = 0;
    for (std::size_t i = open; i < tokens.size(); ++i) {
        if (tokens[i].text == o) ++depth;
        if (tokens[i].text == c && --depth == 0) return i;
    }
    return tokens.size();
}

bool is_wildcard(const std::vector<Token>& t, std::size_t i) {
    if (i == 0 || i + 1 >= t.size()) return false;
    const auto prev = t[i - 1].text;
    const auto next = t[i + 1].text;
    return (prev == "<" || prev == ",") &&
           (next == ">" || next == ">>" || next == ">>>" || next == "," || next == "extends" || next == "super");
}

}  // namespace

std::int64_t sloc(std::string_view src) {
    std::string stripped;
    try {
        const auto lexed = lex::tokenize(src);
        stripped = lex::blank_comments(src, lexed);
    } catch (const Error&) {
        stripped = std::string(src);
    }
    std::int64_t n = 0;
    for (auto line : lines_of(stripped))
        if (!blank(line)) ++n;
    return n;
}

std::int64_t mccabe(std::string_view src) {
    const auto tokens = lex::tokenize(src).tokens;
    std::set<std::size_t> do_whiles;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].kind != TokenKind::Keyword || tokens[i].text != "do" || i + 1 >= tokens.size()) continue;
        std::size_t end;
        if (tokens[i + 1].text == "{") {
            end = matching(tokens, i + 1, "{", "}");
        } else {
            // Single-statement body: up to the first ';' outside brackets.
            int depth = 0;
            end = i + 1;
            for (; end < tokens.size(); ++end) {
                const auto t = tokens[end].text;
                if (t == "(" || t == "{" || t == "[") ++depth;
                if (t == ")" || t == "}" || t == "]") --depth;
                if (t == ";" && depth == 0) break;
            }
        }
        if (end + 1 < tokens.size() && tokens[end + 1].text == "while") do_whiles.insert(end + 1);
    }

    std::int64_t cc = 1;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if (t.kind == TokenKind::Keyword) {
            if (t.text == "if" || t.text == "for" || t.text == "do" || t.text == "case" || t.text == "catch") ++cc;
            if (t.text == "while" && !do_whiles.contains(i)) ++cc;
        } else if (t.kind == TokenKind::Operator) {
            if (t.text == "&&" || t.text == "||") ++cc;
            if (t.text == "?" && !is_wildcard(tokens, i)) ++cc;
        }
    }
    return cc;
}

std::int64_t fan_out(std::string_view src) {
    const auto tokens = lex::tokenize(src).tokens;
    std::size_t body = tokens.size();
    int parens = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].text == "(") ++parens;
        if (tokens[i].text == ")") --parens;
        if (tokens[i].text == "{" && parens == 0) {
            body = i + 1;
            break;
        }
    }
    std::set<std::string_view> callees;
    for (std::size_t i = body; i + 1 < tokens.size(); ++i) {
        if (tokens[i].text == "new") {
            // new a.b.Type<...>(...) calls the Type constructor.
            std::size_t j = i + 1;
            std::size_t name = tokens.size();
            while (j < tokens.size() && (tokens[j].kind == TokenKind::Identifier || tokens[j].text == ".")) {
                if (tokens[j].kind == TokenKind::Identifier) name = j;
                ++j;
            }
            if (name < tokens.size() && j < tokens.size() && tokens[j].text == "<") {
                int depth = 0;
                for (; j < tokens.size(); ++j) {
                    const auto& t = tokens[j].text;
                    if (t == "<") ++depth;
                    else if (t == ">") --depth;
                    else if (t == ">>") depth -= 2;
                    else if (t == ">>>") depth -= 3;
                    if (depth <= 0) break;
                }
                if (j + 1 < tokens.size() && tokens[j + 1].text == "(") callees.insert(tokens[name].text);
            }
            continue;
        }
        if (tokens[i].kind != TokenKind::Identifier || tokens[i + 1].text != "(") continue;
        if (i > 0 && tokens[i - 1].text == "@") continue;
        // A declaration (local or anonymous class method), not a call.
        const std::size_t close = matching(tokens, i + 1, "(", ")");
        if (close + 1 < tokens.size() && (tokens[close + 1].text == "{" || tokens[close + 1].text == "throws"))
            continue;
        callees.insert(tokens[i].text);
    }
    return static_cast<std::int64_t>(callees.size());
}

HalsteadCounts halstead_counts(std::string_view src) {
    const auto tokens = lex::tokenize(src).tokens;
    std::set<std::string_view> ops;
    std::set<std::string_view> operands;
    HalsteadCounts h;
    for (const auto& t : tokens) {
        const bool operand = t.kind == TokenKind::Identifier || t.kind == TokenKind::Number ||
                             t.kind == TokenKind::String || (t.kind == TokenKind::Keyword && is_literal_keyword(t.text));
        if (operand) {
            ++h.total_operands;
            operands.insert(t.text);
        } else {
            ++h.total_operators;
            ops.insert(t.text);
        }
    }
    h.distinct_operators = static_cast<std::int64_t>(ops.size());
    h.distinct_operands = static_cast<std::int64_t>(operands.size());
    return h;
}

double halstead_volume(const HalsteadCounts& h) {
    const auto eta = static_cast<double>(h.distinct_operators + h.distinct_operands);
    if (eta < 2) return 0.0;
    return static_cast<double>(h.total_operators + h.total_operands) * std::log2(eta);
}

double halstead_volume(std::string_view src) { return halstead_volume(halstead_counts(src)); }

double maintainability_index(double volume, std::int64_t cyclomatic, std::int64_t lines) {
    if (lines < 1) throw Error(ErrorCode::InvalidArgument, "maintainability index needs at least one code line");
    const double mi = 171.0 - 5.2 * std::log(std::max(volume, 1.0)) - 0.23 * static_cast<double>(cyclomatic) -
                      16.2 * std::log(static_cast<double>(lines));
    return std::max(0.0, mi);
}

double maintainability_index(std::string_view src) {
    return maintainability_index(halstead_volume(src), mccabe(src), sloc(src));
}

ReadabilityFeatures readability_features(std::string_view src) {
    ReadabilityFeatures f;
    const auto lines = lines_of(src);
    std::vector<std::size_t> nonblank_index;
    double total_len = 0.0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        nonblank_index.push_back(i);
        total_len += static_cast<double>(lines[i].size());
        f.max_line_length = std::max(f.max_line_length, static_cast<double>(lines[i].size()));
    }
    if (nonblank_index.empty()) return f;
    const auto n_lines = static_cast<double>(nonblank_index.size());
    f.avg_line_length = total_len / n_lines;

    lex::LexResult lexed;
    try {
        lexed = lex::tokenize(src);
    } catch (const Error&) {
        return f;  // line-length features only
    }
    double ident_len = 0.0;
    std::size_t idents = 0;
    std::size_t branches = 0;
    for (const auto& t : lexed.tokens) {
        if (t.kind == TokenKind::Identifier) {
            ident_len += static_cast<double>(t.text.size());
            ++idents;
        } else if (t.kind == TokenKind::Keyword) {
            if (t.text == "if" || t.text == "else" || t.text == "for" || t.text == "while" || t.text == "do" ||
                t.text == "switch" || t.text == "case" || t.text == "catch")
                ++branches;
        } else if (t.text == "?") {
            ++branches;
        }
    }
    if (idents) f.avg_identifier_length = ident_len / static_cast<double>(idents);
    f.branch_keyword_density = static_cast<double>(branches) / n_lines;

    std::set<std::size_t> comment_lines;
    for (const auto& c : lexed.comments)
        for (std::size_t l = c.first_line; l <= c.last_line; ++l) comment_lines.insert(l);
    std::size_t commented = 0;
    for (std::size_t i : nonblank_index) commented += comment_lines.contains(i);
    f.comment_density = static_cast<double>(commented) / n_lines;
    return f;
}

double readability(std::string_view src, const ReadabilityWeights& w) {
    const auto f = readability_features(src);
    const double z = w.w0 - w.w1 * f.avg_line_length - w.w2 * f.max_line_length - w.w3 * f.avg_identifier_length -
                     w.w4 * f.branch_keyword_density + w.w5 * f.comment_density;
    return 1.0 / (1.0 + std::exp(-z));
}

CodeMetrics compute_metrics(std::string_view src, const ReadabilityWeights& weights) {
    CodeMetrics m;
    m.size = sloc(src);
    m.readability = readability(src, weights);
    m.mccabe = mccabe(src);
    m.fan_out = fan_out(src);
    m.mi = m.size > 0 ? maintainability_index(halstead_volume(src), m.mccabe, m.size) : 0.0;
    return m;
}

json to_json(const CodeMetrics& m) {
    return json{{"size", m.size}, {"readability", m.readability}, {"mccabe", m.mccabe}, {"fan_out", m.fan_out}, {"mi", m.mi}};
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "method_id,project,size,readability,mccabe,fan_out,mi\n";
    for (const auto& r : rows) {
        out += csv_field(r.method_id) + ',' + csv_field(r.project) + ',' + std::to_string(r.metrics.size) + ',' +
               format_double(r.metrics.readability) + ',' + std::to_string(r.metrics.mccabe) + ',' +
               std::to_string(r.metrics.fan_out) + ',' + format_double(r.metrics.mi) + '\n';
    }
    return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::ParseFailure, "metrics CSV is empty");
    const auto& header = rows.front();
    const auto col = [&](std::string_view name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorCode::ParseFailure, "metrics CSV lacks column " + std::string(name));
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_id = col("method_id"), c_proj = col("project"), c_size = col("size"),
                      c_read = col("readability"), c_cc = col("mccabe"), c_fan = col("fan_out"), c_mi = col("mi");
    std::vector<MetricsRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() == 1 && r[0].empty()) continue;
        if (r.size() < header.size())
            throw Error(ErrorCode::ParseFailure, "metrics CSV row " + std::to_string(i + 1) + " is short");
        try {
            MetricsRow row;
            row.method_id = r[c_id];
            row.project = r[c_proj];
            row.metrics.size = std::stoll(r[c_size]);
            row.metrics.readability = std::stod(r[c_read]);
            row.metrics.mccabe = std::stoll(r[c_cc]);
            row.metrics.fan_out = std::stoll(r[c_fan]);
            row.metrics.mi = std::stod(r[c_mi]);
            out.push_back(std::move(row));
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseFailure, "metrics CSV row " + std::to_string(i + 1) + " has a bad number");
        }
    }
    return out;
}

}  // namespace untangle
