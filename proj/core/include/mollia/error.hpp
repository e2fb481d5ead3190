#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mollia {

enum class ErrorKind {
  Parse,
  Validation,
  State,
  Shape,
  Config,
  Io,
  AnnotatorUnavailable,
  Protocol,
  DegenerateSignal,
  DegenerateModel,
  InsufficientLabels,
};

std::string_view to_string(ErrorKind kind);

// Base of every error thrown by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class AnnotatorUnavailable : public Error {
 public:
  AnnotatorUnavailable(std::string annotator, const std::string& what)
      : Error(ErrorKind::AnnotatorUnavailable, "annotator '" + annotator + "' unavailable: " + what),
        annotator_(std::move(annotator)) {}
  const std::string& annotator() const noexcept { return annotator_; }

 private:
  std::string annotator_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace mollia
