#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reef::textio {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

// Strict full-string numeric parses; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);

// Minimal CSV row handling: fields never contain the separator or quotes in
// the formats this library writes, so no quoting is supported.
std::string join(const std::vector<std::string>& fields, char sep = ',');

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

}  // namespace reef::textio
