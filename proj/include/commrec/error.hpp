#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace commrec {

// Base class for every error the library raises on bad input or a broken
// contract. Anything else escaping the library is an internal failure.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed record in a line-oriented input file.
class ParseError : public Error {
public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), source_(source), line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::string source_;
  std::size_t line_;
};

// A record references an id that does not exist elsewhere in the dataset.
class ReferenceError : public Error {
public:
  using Error::Error;
};

// Caller violated a documented precondition.
class ContractError : public Error {
public:
  using Error::Error;
};

// Numerical failure such as divergence during training.
class NumericError : public Error {
public:
  using Error::Error;
};

} // namespace commrec
