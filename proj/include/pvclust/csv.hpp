#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pvclust/errors.hpp"

namespace pvclust::csv {

// The formats in this project are plain comma-separated values with no
// quoting (ids and numbers only), so a simple splitter is all we need.
inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

// Shortest decimal string that round-trips the exact double value.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
    s = trim(s);
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

inline double require_double(std::string_view s, const std::string& where) {
    double v;
    if (!parse_double(s, v))
        throw DataError(where + ": expected a number, got '" + std::string(s) + "'");
    return v;
}

inline std::int64_t require_int(std::string_view s, const std::string& where) {
    std::int64_t v;
    if (!parse_int(s, v))
        throw DataError(where + ": expected an integer, got '" + std::string(s) + "'");
    return v;
}

// Reads all lines; strips trailing '\r'; drops a trailing empty line.
inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline void append_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw DataError("cannot open file for append: " + path);
    out << content;
    if (!out) throw DataError("append failed: " + path);
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("write failed: " + path);
}

} // namespace pvclust::csv
