// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace epsnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file or header does not match the expected column layout.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// One input row could not be parsed.
class RowError : public Error {
 public:
  RowError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Operand dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Design matrix is rank deficient; carries the offending column names.
class RankError : public Error {
 public:
  RankError(const std::string& what, std::vector<std::string> columns)
      : Error(with_columns(what, columns)), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  static std::string with_columns(const std::string& what, const std::vector<std::string>& columns) {
    std::string out = what + " (";
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? ", " : "") + columns[i];
    return out + ")";
  }

  std::vector<std::string> columns_;
};

/// Data violates a documented precondition (empty input, zero denominator, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid command line or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A required input file is missing or unreadable.
class FileError : public Error {
 public:
  explicit FileError(const std::string& path) : Error("cannot open '" + path + "'"), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Training diverged or produced a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace epsnet
