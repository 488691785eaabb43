#pragma once

#include <string>

namespace rcsopt {

/// Fixed %.12g formatting so identical doubles always serialize identically.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace rcsopt
