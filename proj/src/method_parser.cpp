#include "untangle/method_parser.hpp"

#include "untangle/error.hpp"
#include "untangle/lexer.hpp"

#include <algorithm>
#include <map>
#include <optional>

namespace untangle {

bool ParserConfig::accepts(std::string_view path) const {
    return std::any_of(extensions.begin(), extensions.end(), [&](const std::string& ext) {
        return path.size() >= ext.size() && path.substr(path.size() - ext.size()) == ext;
    });
}

namespace {

using lex::Token;
using lex::TokenKind;

enum class ScopeKind { File, Type, Method, Other };

struct Scope {
    ScopeKind kind;
    std::string type_path;          // for File/Type
    bool is_enum = false;
    bool enum_constants_done = true;
    std::size_t header_start = 0;   // token index of the pending member header
    std::size_t paren_depth = 0;    // parens open inside the pending header
    std::size_t decl_first_token = 0;  // for Method
    std::string signature;             // for Method
    std::string name;                  // for Method
};

bool is_op(const Token& t, std::string_view op) { return t.kind == TokenKind::Operator && t.text == op; }
bool is_word(const Token& t) { return t.kind == TokenKind::Identifier || t.kind == TokenKind::Keyword; }

// Skips an annotation starting at tokens[k] == "@"; returns the index after it.
std::size_t skip_annotation(const std::vector<Token>& toks, std::size_t k, std::size_t end) {
    ++k;  // '@'
    if (k < end && is_word(toks[k])) ++k;
    while (k + 1 < end && is_op(toks[k], ".") && is_word(toks[k + 1])) k += 2;
    if (k < end && is_op(toks[k], "(")) {
        int depth = 0;
        for (; k < end; ++k) {
            if (is_op(toks[k], "(")) ++depth;
            if (is_op(toks[k], ")") && --depth == 0) {
                ++k;
                break;
            }
        }
    }
    return k;
}

struct HeaderInfo {
    enum Kind { TypeDecl, MethodDecl, Other } kind = Other;
    std::string name;
    bool is_enum = false;
    std::size_t open_paren = 0;
    std::size_t close_paren = 0;
};

HeaderInfo classify_header(const std::vector<Token>& toks, std::size_t begin, std::size_t end) {
    HeaderInfo info;
    std::vector<std::size_t> idx;  // header tokens with annotations removed
    for (std::size_t k = begin; k < end;) {
        if (is_op(toks[k], "@")) {
            if (k + 1 < end && toks[k + 1].text == "interface") {
                if (k + 2 < end) info.name = std::string(toks[k + 2].text);
                info.kind = HeaderInfo::TypeDecl;
                return info;
            }
            k = skip_annotation(toks, k, end);
            continue;
        }
        idx.push_back(k++);
    }
    bool seen_assign = false;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const Token& t = toks[idx[j]];
        if (is_op(t, "=")) seen_assign = true;
        if (seen_assign) break;
        const bool type_kw = t.kind == TokenKind::Keyword &&
                             (t.text == "class" || t.text == "interface" || t.text == "enum");
        const bool record_kw = t.kind == TokenKind::Identifier && t.text == "record" && j + 2 < idx.size() &&
                               toks[idx[j + 1]].kind == TokenKind::Identifier &&
                               (is_op(toks[idx[j + 2]], "(") || is_op(toks[idx[j + 2]], "<"));
        if ((type_kw || record_kw) && j + 1 < idx.size() && toks[idx[j + 1]].kind == TokenKind::Identifier) {
            info.kind = HeaderInfo::TypeDecl;
            info.name = std::string(toks[idx[j + 1]].text);
            info.is_enum = t.text == "enum";
            return info;
        }
    }
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const Token& t = toks[idx[j]];
        if (is_op(t, "=") || (t.kind == TokenKind::Keyword && t.text == "new")) return info;
        if (is_op(t, "(")) {
            if (j == 0 || toks[idx[j - 1]].kind != TokenKind::Identifier) return info;
            int depth = 0;
            std::size_t k = idx[j];
            for (; k < end; ++k) {
                if (is_op(toks[k], "(")) ++depth;
                if (is_op(toks[k], ")") && --depth == 0) break;
            }
            if (k >= end) return info;
            info.kind = HeaderInfo::MethodDecl;
            info.name = std::string(toks[idx[j - 1]].text);
            info.open_paren = idx[j];
            info.close_paren = k;
            return info;
        }
    }
    return info;
}

// Joins tokens, inserting a space only between two word-like tokens.
std::string join_tokens(const std::vector<const Token*>& parts) {
    std::string out;
    const Token* prev = nullptr;
    for (const Token* t : parts) {
        if (prev && is_word(*prev) && is_word(*t)) out += ' ';
        out += t->text;
        prev = t;
    }
    return out;
}

std::string parameter_types(const std::vector<Token>& toks, std::size_t open, std::size_t close) {
    std::vector<std::vector<const Token*>> params(1);
    int depth = 0;
    for (std::size_t k = open + 1; k < close; ++k) {
        const Token& t = toks[k];
        if (is_op(t, "(") || is_op(t, "<") || is_op(t, "[")) ++depth;
        else if (is_op(t, ")") || is_op(t, ">") || is_op(t, "]")) --depth;
        else if (is_op(t, ">>")) depth -= 2;
        else if (is_op(t, ">>>")) depth -= 3;
        if (depth == 0 && is_op(t, ",")) {
            params.emplace_back();
            continue;
        }
        params.back().push_back(&t);
    }
    std::vector<std::string> types;
    for (auto& p : params) {
        std::vector<const Token*> cleaned;
        for (std::size_t k = 0; k < p.size();) {
            if (is_op(*p[k], "@")) {
                // Annotation inside a parameter list; skip name and optional args.
                ++k;
                if (k < p.size()) ++k;
                while (k + 1 < p.size() && is_op(*p[k], ".") && is_word(*p[k + 1])) k += 2;
                if (k < p.size() && is_op(*p[k], "(")) {
                    int d = 0;
                    for (; k < p.size(); ++k) {
                        if (is_op(*p[k], "(")) ++d;
                        if (is_op(*p[k], ")") && --d == 0) {
                            ++k;
                            break;
                        }
                    }
                }
                continue;
            }
            if (p[k]->kind == TokenKind::Keyword && p[k]->text == "final") {
                ++k;
                continue;
            }
            cleaned.push_back(p[k++]);
        }
        if (cleaned.empty()) continue;
        // Trailing C-style array dims belong to the type: "int x[]" -> "int[]".
        std::size_t trailing_dims = 0;
        while (cleaned.size() >= 2 && is_op(*cleaned.back(), "]") && is_op(*cleaned[cleaned.size() - 2], "[")) {
            cleaned.resize(cleaned.size() - 2);
            ++trailing_dims;
        }
        if (cleaned.size() >= 2 && cleaned.back()->kind == TokenKind::Identifier) cleaned.pop_back();
        std::string type = join_tokens(cleaned);
        for (std::size_t d = 0; d < trailing_dims; ++d) type += "[]";
        types.push_back(std::move(type));
    }
    std::string out;
    for (std::size_t i = 0; i < types.size(); ++i) {
        if (i) out += ',';
        out += types[i];
    }
    return out;
}

std::size_t line_start(std::string_view src, std::size_t offset) {
    const std::size_t nl = src.rfind('\n', offset == 0 ? 0 : offset - 1);
    if (offset == 0 || nl == std::string_view::npos) return 0;
    return nl + 1;
}

bool only_space(std::string_view text) {
    return std::all_of(text.begin(), text.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

std::vector<MethodDecl> parse_methods(std::string_view source, const ParserConfig& cfg) {
    if (cfg.language != "java")
        throw Error(ErrorCode::InvalidArgument, "unsupported parser language: " + cfg.language);
    lex::LexResult lexed;
    try {
        lexed = lex::tokenize(source);
    } catch (const Error& e) {
        throw Error(ErrorCode::UnparsableFile, e.what());
    }
    const std::string blanked = lex::blank_comments(source, lexed);
    const auto& toks = lexed.tokens;

    std::vector<MethodDecl> methods;
    std::map<std::string, int> seen;
    std::vector<Scope> stack;
    stack.push_back({ScopeKind::File, "", false, true, 0, 0, 0, {}, {}});

    for (std::size_t i = 0; i < toks.size(); ++i) {
        const Token& t = toks[i];
        Scope& top = stack.back();
        const bool member_level = top.kind == ScopeKind::File || top.kind == ScopeKind::Type;

        if (member_level && top.paren_depth > 0) {
            // Inside annotation arguments or a field initializer call; braces
            // here are array initializers or anonymous bodies we do not enter.
            if (is_op(t, "(")) ++top.paren_depth;
            else if (is_op(t, ")")) --top.paren_depth;
            continue;
        }

        if (is_op(t, "(")) {
            if (member_level) ++top.paren_depth;
            continue;
        }
        if (is_op(t, ";")) {
            if (member_level) {
                top.header_start = i + 1;
                top.enum_constants_done = true;
            }
            continue;
        }
        if (is_op(t, ",") && top.kind == ScopeKind::Type && top.is_enum && !top.enum_constants_done) {
            top.header_start = i + 1;
            continue;
        }
        if (is_op(t, "{")) {
            if (!member_level) {
                stack.push_back({ScopeKind::Other, "", false, true, 0, 0, 0, {}, {}});
                continue;
            }
            const HeaderInfo h = classify_header(toks, top.header_start, i);
            if (h.kind == HeaderInfo::TypeDecl) {
                std::string path = top.type_path.empty() ? h.name : top.type_path + "." + h.name;
                stack.push_back({ScopeKind::Type, std::move(path), h.is_enum, !h.is_enum, i + 1, 0, 0, {}, {}});
            } else if (h.kind == HeaderInfo::MethodDecl && top.kind == ScopeKind::Type &&
                       !(top.is_enum && !top.enum_constants_done)) {
                Scope m{ScopeKind::Method, "", false, true, 0, 0, top.header_start, {}, h.name};
                m.signature = (top.type_path.empty() ? "" : top.type_path + ".") + h.name + "(" +
                              parameter_types(toks, h.open_paren, h.close_paren) + ")";
                stack.push_back(std::move(m));
            } else {
                stack.push_back({ScopeKind::Other, "", false, true, 0, 0, 0, {}, {}});
            }
            continue;
        }
        if (is_op(t, "}")) {
            if (stack.size() <= 1)
                throw Error(ErrorCode::UnparsableFile, "unbalanced '}' at line " + std::to_string(t.line + 1));
            Scope closed = std::move(stack.back());
            stack.pop_back();
            if (closed.kind == ScopeKind::Method) {
                const Token& first = toks[closed.decl_first_token];
                std::size_t begin = line_start(blanked, first.offset);
                if (!only_space(std::string_view(blanked).substr(begin, first.offset - begin))) begin = first.offset;
                std::size_t end = t.offset + 1;
                std::size_t eol = blanked.find('\n', end);
                if (eol == std::string::npos) eol = blanked.size();
                if (only_space(std::string_view(blanked).substr(end, eol - end))) end = eol;

                MethodDecl decl;
                decl.name = closed.name;
                decl.signature = closed.signature;
                const int occurrence = ++seen[decl.signature];
                if (occurrence > 1) decl.signature += "#" + std::to_string(occurrence);
                decl.source = std::string(source.substr(begin, end - begin));
                if (decl.source.empty() || decl.source.back() != '\n') decl.source += '\n';
                decl.first_line = first.line;
                decl.last_line = t.line;
                methods.push_back(std::move(decl));
            }
            Scope& parent = stack.back();
            if (parent.kind == ScopeKind::File || parent.kind == ScopeKind::Type) parent.header_start = i + 1;
            continue;
        }
    }
    if (stack.size() != 1)
        throw Error(ErrorCode::UnparsableFile, "unbalanced braces: " + std::to_string(stack.size() - 1) + " unclosed");
    return methods;
}

}  // namespace untangle
