#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace untangle {

// Strips trailing whitespace from every line and collapses runs of blank
// lines into one. Every line of the result ends with '\n'.
std::string normalize_source(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);

// Single-hunk unified diff of two method texts with the whole method kept as
// context. Both sides are normalized first. Within a changed region all "-"
// lines precede the "+" lines, and hunk ranges follow GNU diff conventions
// (a count of 1 is omitted, an empty side is reported as "0,0").
// Throws Error{NoChange} when the normalized sources are identical.
std::string compute_method_diff(std::string_view before_source, std::string_view after_source);

}  // namespace untangle
