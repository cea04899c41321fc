#include "untangle/lexer.hpp"

#include "untangle/error.hpp"

#include <algorithm>
#include <iterator>
#include <cctype>
#include <string>

namespace untangle::lex {
namespace {

constexpr std::string_view kKeywords[] = {
    "abstract", "assert",     "boolean",  "break",     "byte",         "case",      "catch",
    "char",     "class",      "const",    "continue",  "default",      "do",        "double",
    "else",     "enum",       "extends",  "final",     "finally",      "float",     "for",
    "goto",     "if",         "implements", "import",  "instanceof",   "int",       "interface",
    "long",     "native",     "new",      "package",   "private",      "protected", "public",
    "return",   "short",      "static",   "strictfp",  "super",        "switch",    "synchronized",
    "this",     "throw",      "throws",   "transient", "try",          "void",      "volatile",
    "while",    "true",       "false",    "null"};

// Longest first so greedy matching picks ">>>=" over ">>".
constexpr std::string_view kMultiCharOps[] = {
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=",
    ">=",   "+=",  "-=",  "*=",  "/=",  "&=", "|=", "^=", "%=", "<<", ">>"};

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
           static_cast<unsigned char>(c) >= 0x80;
}

bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

}  // namespace

bool is_keyword(std::string_view word) noexcept {
    return std::find(std::begin(kKeywords), std::end(kKeywords), word) != std::end(kKeywords);
}

LexResult tokenize(std::string_view src) {
    LexResult out;
    std::size_t i = 0;
    std::size_t line = 0;
    const std::size_t n = src.size();

    auto advance_to = [&](std::size_t end) {
        for (std::size_t k = i; k < end; ++k)
            if (src[k] == '\n') ++line;
        i = end;
    };

    while (i < n) {
        const char c = src[i];
        if (c == '\n') {
            ++line;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            std::size_t end = src.find('\n', i);
            if (end == std::string_view::npos) end = n;
            out.comments.push_back({i, end - i, line, line});
            i = end;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            const std::size_t close = src.find("*/", i + 2);
            if (close == std::string_view::npos)
                throw Error(ErrorCode::ParseFailure, "unterminated block comment at line " + std::to_string(line + 1));
            const std::size_t first = line;
            const std::size_t start = i;
            advance_to(close + 2);
            out.comments.push_back({start, close + 2 - start, first, line});
            continue;
        }
        if (c == '"' && src.substr(i, 3) == "\"\"\"") {
            const std::size_t close = src.find("\"\"\"", i + 3);
            if (close == std::string_view::npos)
                throw Error(ErrorCode::ParseFailure, "unterminated text block at line " + std::to_string(line + 1));
            const std::size_t start = i;
            const std::size_t start_line = line;
            advance_to(close + 3);
            out.tokens.push_back({TokenKind::String, src.substr(start, close + 3 - start), start, start_line});
            continue;
        }
        if (c == '"' || c == '\'') {
            std::size_t k = i + 1;
            while (k < n && src[k] != c) {
                if (src[k] == '\\') ++k;
                else if (src[k] == '\n') break;
                ++k;
            }
            if (k >= n || src[k] != c)
                throw Error(ErrorCode::ParseFailure, "unterminated literal at line " + std::to_string(line + 1));
            out.tokens.push_back({TokenKind::String, src.substr(i, k + 1 - i), i, line});
            i = k + 1;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t k = i + 1;
            while (k < n) {
                const char d = src[k];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
                    ++k;
                } else if ((d == '+' || d == '-') && (src[k - 1] == 'e' || src[k - 1] == 'E' ||
                                                      src[k - 1] == 'p' || src[k - 1] == 'P') &&
                           !(src.substr(i, 2) == "0x" || src.substr(i, 2) == "0X")) {
                    ++k;
                } else {
                    break;
                }
            }
            out.tokens.push_back({TokenKind::Number, src.substr(i, k - i), i, line});
            i = k;
            continue;
        }
        if (ident_start(c)) {
            std::size_t k = i + 1;
            while (k < n && ident_char(src[k])) ++k;
            const auto word = src.substr(i, k - i);
            out.tokens.push_back({is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, word, i, line});
            i = k;
            continue;
        }
        std::size_t len = 1;
        for (auto op : kMultiCharOps) {
            if (src.substr(i, op.size()) == op) {
                len = op.size();
                break;
            }
        }
        out.tokens.push_back({TokenKind::Operator, src.substr(i, len), i, line});
        i += len;
    }
    return out;
}

std::string blank_comments(std::string_view source, const LexResult& lexed) {
    std::string out(source);
    for (const auto& c : lexed.comments) {
        for (std::size_t k = c.offset; k < c.offset + c.length; ++k)
            if (out[k] != '\n') out[k] = ' ';
    }
    return out;
}

}  // namespace untangle::lex
