#pragma once

#include <stdexcept>
#include <string>

namespace pbbench {

enum class Errc {
  already_initialized,
  duplicate_component,
  not_found,
  schema_violation,
  rejection_overflow,
  aggregation_error,
  invalid_argument,
  io_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::already_initialized: return "AlreadyInitialized";
    case Errc::duplicate_component: return "DuplicateComponent";
    case Errc::not_found: return "NotFound";
    case Errc::schema_violation: return "SchemaViolation";
    case Errc::rejection_overflow: return "RejectionOverflow";
    case Errc::aggregation_error: return "AggregationError";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io_error: return "IoError";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace pbbench
