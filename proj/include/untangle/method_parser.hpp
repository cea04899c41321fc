#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace untangle {

// Options for the brace-delimited method extractor. Only the Java dialect
// is implemented; the field exists so corpora can select by extension.
struct ParserConfig {
    std::string language = "java";
    std::vector<std::string> extensions{".java"};

    bool accepts(std::string_view path) const;
};

struct MethodDecl {
    // Qualified, whitespace-collapsed signature: Outer.Inner.name(T1,T2).
    std::string signature;
    std::string name;
    // Full declaration text including annotations and the signature line,
    // each line terminated by '\n'.
    std::string source;
    std::size_t first_line = 0;  // 0-based
    std::size_t last_line = 0;
};

// Extracts every method and constructor declared directly inside a type
// declaration (class, interface, enum, record, annotation type), including
// nested types. Bodies of anonymous classes and lambdas stay part of the
// enclosing method. Throws Error{UnparsableFile} on lexer failure or
// unbalanced braces.
std::vector<MethodDecl> parse_methods(std::string_view source, const ParserConfig& cfg = {});

}  // namespace untangle
