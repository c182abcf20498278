#ifndef LSP_TEXT_FORMAT_HPP
#define LSP_TEXT_FORMAT_HPP

#include <charconv>
#include <cstdio>
#include <string>

namespace lsp {

// shortest decimal string that parses back to the same double
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// bit-exact hexadecimal float, e.g. "0x1.5bf0a8b145769p+1"
inline std::string format_double_hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return std::string(buf);
}

}  // namespace lsp

#endif
