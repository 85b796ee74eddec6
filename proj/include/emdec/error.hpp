#pragma once

#include <stdexcept>
#include <string>

namespace emdec {

// Broad failure category; the CLI maps these onto exit codes.
enum class ErrorKind {
  invalid_argument,
  parse,
  degenerate_mesh,
  numeric,
  io,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

// Parse failure carrying the 1-based line of the offending input.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class DegenerateMeshError : public Error {
public:
  DegenerateMeshError(int dim, std::size_t cell, const std::string& what)
      : Error(ErrorKind::degenerate_mesh,
              "degenerate " + std::to_string(dim) + "-cell " +
                  std::to_string(cell) + ": " + what),
        dim_(dim), cell_(cell) {}

  int cell_dim() const noexcept { return dim_; }
  std::size_t cell() const noexcept { return cell_; }

private:
  int dim_;
  std::size_t cell_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorKind::invalid_argument, what);
}

inline Error numeric_error(const std::string& what) {
  return Error(ErrorKind::numeric, what);
}

} // namespace emdec
