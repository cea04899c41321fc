#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace untangle {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

// Writes bytes atomically (temp file + rename). Throws Error{IoFailure}.
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::vector<json> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<json>& rows);

// RFC 4180 field quoting: quoted only when the field contains a comma,
// quote, CR or LF.
std::string csv_field(std::string_view field);

// Splits a CSV document into rows of fields, honouring quoted fields.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string trim(std::string_view text);

std::string to_lower(std::string_view text);

// Shortest decimal form that round-trips the double.
std::string format_double(double value);

}  // namespace untangle
