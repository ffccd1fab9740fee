#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pvi {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A mesh file could not be parsed. Carries the line (1-based, 0 if not
/// applicable) and the field being read.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::string field)
      : Error(format(what, line, field)), reason_(what), line_(line), field_(std::move(field)) {}

  /// The message without the location prefix.
  const std::string& reason() const noexcept { return reason_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(const std::string& what, std::size_t line, const std::string& field) {
    std::string msg = "parse error";
    if (line > 0) msg += " at line " + std::to_string(line);
    if (!field.empty()) msg += " (field '" + field + "')";
    return msg + ": " + what;
  }

  std::string reason_;
  std::size_t line_;
  std::string field_;
};

/// Geometric or topological validation failure. `entity` is "cell" or "edge".
class MeshError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  MeshError(const std::string& what, std::string entity = {}, std::size_t id = npos)
      : Error(entity.empty() ? what : entity + " " + std::to_string(id) + ": " + what),
        reason_(what),
        entity_(std::move(entity)),
        id_(id) {}

  const std::string& reason() const noexcept { return reason_; }
  const std::string& entity() const noexcept { return entity_; }
  std::size_t id() const noexcept { return id_; }

 private:
  std::string reason_;
  std::string entity_;
  std::size_t id_;
};

/// Failure inside a numerical solve (singular system, cycling, non-convergence).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace pvi
