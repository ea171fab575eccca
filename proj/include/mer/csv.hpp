#pragma once

#include <string>
#include <vector>

namespace mer {

/// Minimal CSV support for the project's numeric interchange files:
/// comma-separated, UTF-8, LF endings, header row, no quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line);

/// Reads a whole file; requires a header row. Trailing CR is stripped so
/// CRLF files load too. Throws IoError on missing file or ragged rows when
/// `require_rectangular` is set.
CsvTable read_csv(const std::string& path, bool require_rectangular = true);

/// Parses a cell as double; throws IoError naming the cell on failure.
double parse_cell(const std::string& cell, const std::string& context);

/// Formats with fixed six decimal places, the project-wide CSV convention
/// for emotion coordinates.
std::string format_fixed6(double v);

/// Shortest round-trip-exact representation, used for loss curves.
std::string format_exact(double v);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace mer
