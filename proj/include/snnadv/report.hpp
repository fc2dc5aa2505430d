#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace snnadv {

/// Creates parent directories as needed and replaces the file.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);
std::string read_text(const std::filesystem::path& path);

}  // namespace snnadv
