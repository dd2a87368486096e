#pragma once

#include <string>
#include <string_view>

namespace am {

// Whole-file helpers. read_file throws am::Error when the file cannot be
// opened; write_file creates parent directories as needed.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);
bool file_exists(const std::string& path);

}  // namespace am
