#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace align::jsonl {

/// Reads one JSON object per non-blank line. Parse failures carry the line
/// number.
std::vector<nlohmann::json> read_file(const std::filesystem::path& path);
std::vector<nlohmann::json> parse(std::string_view content);

void write_file(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
std::string dump(const std::vector<nlohmann::json>& rows);

/// Appends a line and flushes.
void append(const std::filesystem::path& path, const nlohmann::json& row);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes pretty-printed JSON followed by a newline; output is byte-stable
/// for equal values.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view content);

}  // namespace align::jsonl
