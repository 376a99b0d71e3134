#include "loadnet/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace loadnet::csv {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<Row> read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::vector<Row> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(Row{line_no, split_line(line)});
    }
    return rows;
}

void require_header(const Row& header, const std::vector<std::string>& expected, const std::string& path) {
    if (header.fields == expected) return;
    std::string want;
    for (const auto& f : expected) {
        if (!want.empty()) want += ',';
        want += f;
    }
    throw ParseError("unexpected header in " + path + "; expected: " + want, header.line);
}

double parse_double(const std::string& field, const std::string& column, int line) {
    if (field.empty()) throw ParseError("empty " + column + " field", line);
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(field.c_str(), &end);
    if (errno != 0 || end == field.c_str() || *end != '\0')
        throw ParseError("non-numeric " + column + " value '" + field + "'", line);
    return v;
}

long long parse_int(const std::string& field, const std::string& column, int line) {
    if (field.empty()) throw ParseError("empty " + column + " field", line);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(field.c_str(), &end, 10);
    if (errno != 0 || end == field.c_str() || *end != '\0')
        throw ParseError("non-integer " + column + " value '" + field + "'", line);
    return v;
}

unsigned long long parse_uint(const std::string& field, const std::string& column, int line) {
    if (field.empty()) throw ParseError("empty " + column + " field", line);
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(field.c_str(), &end, 10);
    if (errno != 0 || end == field.c_str() || *end != '\0' || field[0] == '-')
        throw ParseError("non-integer " + column + " value '" + field + "'", line);
    return v;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void write_kv_file(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

std::string format_exact(double v) {
    char buf[64];
    // 17 significant digits round-trip any IEEE-754 double.
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

} // namespace loadnet::csv
