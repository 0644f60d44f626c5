#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace mldoc {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::string sha256_hex(std::string_view bytes);

std::vector<nlohmann::json> parse_jsonl(std::string_view text, const std::string& source);
std::string to_jsonl(const std::vector<nlohmann::json>& rows);

}  // namespace mldoc
