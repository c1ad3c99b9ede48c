/**
 * @file
 * @brief Exception hierarchy used throughout vpsvm.
 *
 * Three classes of failure are distinguished because the command-line tool
 * maps each one to its own exit code:
 *   - parse_error:  malformed input data or model files,
 *   - config_error: invalid parameters or inconsistent configuration,
 *   - error:        everything else (I/O failures, runtime faults).
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vpsvm {

class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class parse_error : public error {
  public:
    using error::error;

    parse_error(const std::string &message, std::size_t line)
        : error("line " + std::to_string(line) + ": " + message), line_{ line } {}

    /// 1-based line number of the offending input, 0 if unknown.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_{ 0 };
};

class config_error : public error {
  public:
    using error::error;
};

/// A requested size exceeds what the input provides.
class size_error : public config_error {
  public:
    using config_error::config_error;
};

/// A numeric parameter is out of its admissible range.
class parameter_error : public config_error {
  public:
    using config_error::config_error;
};

/// An operation was applied to an object it does not support.
class usage_error : public config_error {
  public:
    using config_error::config_error;
};

/// A point lies outside the domain of a distribution.
class domain_error : public config_error {
  public:
    using config_error::config_error;
};

class io_error : public error {
  public:
    using error::error;
};

}  // namespace vpsvm
