#include "mer/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mer/error.hpp"

namespace mer {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

CsvTable read_csv(const std::string& path, bool require_rectangular) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);

    CsvTable table;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == EOF) break;  // tolerate trailing newline
        auto cells = split_csv_line(line);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            if (require_rectangular && cells.size() != table.header.size()) {
                throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table.header.size()) + " columns, got " +
                              std::to_string(cells.size()));
            }
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) throw IoError("CSV file has no header row: " + path);
    return table;
}

double parse_cell(const std::string& cell, const std::string& context) {
    // strtod rather than stod: stod raises out_of_range on subnormals,
    // which are legitimate in full-precision loss curves.
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin) {
        while (*end == ' ' || *end == '\t') ++end;
    }
    if (end == begin || *end != '\0') {
        throw IoError("non-numeric cell '" + cell + "' in " + context);
    }
    return v;
}

std::string format_fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string format_exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("short write to " + path);
}

}  // namespace mer
