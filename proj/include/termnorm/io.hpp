#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace termnorm {

using json = nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path);

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// readers never observe a partially written file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::vector<std::string_view> split_tabs(std::string_view line);

/// Calls `fn(object, line_number)` for every non-blank line of a JSON-lines
/// stream. Lines that are not JSON objects raise ParseError.
void for_each_jsonl(std::istream& in, const std::string& source,
                    const std::function<void(const json&, std::size_t)>& fn);

std::string to_jsonl(const std::vector<json>& rows);

/// Reads a string field, raising ParseError when absent or not a string.
std::string require_string(const json& obj, const char* key, const std::string& source,
                           std::size_t line);

}  // namespace termnorm
