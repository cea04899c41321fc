#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace untangle::lex {

enum class TokenKind { Identifier, Keyword, Number, String, Operator };

struct Token {
    TokenKind kind;
    std::string_view text;  // view into the lexed source
    std::size_t offset;
    std::size_t line;  // 0-based
};

struct Comment {
    std::size_t offset;
    std::size_t length;
    std::size_t first_line;
    std::size_t last_line;
};

struct LexResult {
    std::vector<Token> tokens;
    std::vector<Comment> comments;
};

// Tokenizes Java-like source. Comments are reported separately and never
// appear as tokens. Throws Error{ParseFailure} on unterminated comments,
// string literals or text blocks.
LexResult tokenize(std::string_view source);

bool is_keyword(std::string_view word) noexcept;

// Source with every comment replaced by spaces (newlines kept), so line
// structure and offsets are unchanged.
std::string blank_comments(std::string_view source, const LexResult& lexed);

}  // namespace untangle::lex
