#pragma once

#include <string>
#include <vector>

namespace splitroa {

/// Shortest text that reads back to the same double (17 significant digits);
/// non-finite values become "nan", "inf" or "-inf".
std::string format_real(double value);

/// One CSV line (no trailing newline) from already formatted cells.
std::string csv_line(const std::vector<std::string>& cells);

/// Writes `text` to `path`, throwing std::runtime_error on failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace splitroa
