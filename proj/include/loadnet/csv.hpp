#pragma once

#include "loadnet/errors.hpp"

#include <map>
#include <string>
#include <vector>

namespace loadnet::csv {

struct Row {
    int line = 0; // 1-based line number in the source file
    std::vector<std::string> fields;
};

// Reads a comma-separated file. No quoting support; none of the formats
// used here need it. Blank lines are skipped, trailing \r stripped.
std::vector<Row> read_file(const std::string& path);

// Splits one line; exposed for stream-style callers.
std::vector<std::string> split_line(const std::string& line);

// Throws ParseError naming the column and line when the header differs.
void require_header(const Row& header, const std::vector<std::string>& expected, const std::string& path);

double parse_double(const std::string& field, const std::string& column, int line);
long long parse_int(const std::string& field, const std::string& column, int line);
unsigned long long parse_uint(const std::string& field, const std::string& column, int line);

// `key=value` files, '#' comments, blank lines ignored.
std::map<std::string, std::string> read_kv_file(const std::string& path);
void write_kv_file(const std::string& path, const std::map<std::string, std::string>& kv);

// Shortest decimal form that round-trips the double exactly.
std::string format_exact(double v);
// Fixed general format for report cells.
std::string format_g6(double v);
std::string format_fixed(double v, int decimals);

} // namespace loadnet::csv
