#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace idps {

// Error raised while decoding trace lines, rule text, profiles or alert
// files. `field` names the offending input field when known, `line` is the
// 1-based line number (0 when the context has no line, e.g. a single
// free-standing record).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(std::string message, std::string field = {}, std::size_t line = 0)
        : std::runtime_error(format(message, line)),
          message_(std::move(message)),
          field_(std::move(field)),
          line_(line) {}

    const std::string& message() const { return message_; }
    const std::string& field() const { return field_; }
    std::size_t line() const { return line_; }

    ParseError with_line(std::size_t line) const { return ParseError(message_, field_, line); }

private:
    static std::string format(const std::string& message, std::size_t line) {
        if (line == 0) return message;
        return "line " + std::to_string(line) + ": " + message;
    }

    std::string message_;
    std::string field_;
    std::size_t line_;
};

class IoError : public std::runtime_error {
public:
    explicit IoError(std::string message) : std::runtime_error(std::move(message)) {}
};

} // namespace idps
