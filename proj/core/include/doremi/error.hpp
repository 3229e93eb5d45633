#pragma once

#include <stdexcept>
#include <string>

namespace doremi {

// Base for every error raised by the library. Subclasses let callers (the CLI,
// the HTTP service) map failures onto exit codes and status codes.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record: bad JSON, missing or mistyped field.
class parse_error : public error {
 public:
  using error::error;
};

// Well-formed input that breaks a domain invariant.
class validation_error : public error {
 public:
  using error::error;
};

// Caller passed arguments outside an operation's domain.
class argument_error : public error {
 public:
  using error::error;
};

// Operation invoked in a state where its precondition does not hold.
class precondition_error : public error {
 public:
  using error::error;
};

class io_error : public error {
 public:
  using error::error;
};

// External model adapter exited nonzero.
class adapter_error : public error {
 public:
  adapter_error(const std::string& what, std::string diagnostics)
      : error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class timeout_error : public error {
 public:
  using error::error;
};

// Adapter exited cleanly but broke the file protocol (no output file, ...).
class protocol_error : public error {
 public:
  using error::error;
};

// Checkpoint written by an incompatible schema version.
class version_error : public error {
 public:
  using error::error;
};

// Conflicting state transition (duplicate annotation, stale lease, ...).
class conflict_error : public error {
 public:
  using error::error;
};

}  // namespace doremi
