#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace statesim {

// File or schema problem while reading/writing artifacts.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Formats a double with 17 significant digits, enough for an exact
// round trip through decimal text.
inline std::string format_real(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path.string());
    return out.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace statesim
