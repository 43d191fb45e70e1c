#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace kgx {

using TermId = std::uint32_t;
inline constexpr TermId kNoTerm = std::numeric_limits<TermId>::max();

// Error codes double as the wire-level error identifiers of the service.
enum class ErrorCode {
  parse_error,
  unknown_term,
  invalid_query,
  illegal_expansion,
  dataset_not_found,
  session_not_found,
  invalid_argument,
  cancelled,
  enumeration_cap,
  internal,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::parse_error: return "PARSE_ERROR";
    case ErrorCode::unknown_term: return "UNKNOWN_TERM";
    case ErrorCode::invalid_query: return "INVALID_QUERY";
    case ErrorCode::illegal_expansion: return "ILLEGAL_EXPANSION";
    case ErrorCode::dataset_not_found: return "DATASET_NOT_FOUND";
    case ErrorCode::session_not_found: return "SESSION_NOT_FOUND";
    case ErrorCode::invalid_argument: return "INVALID_ARGUMENT";
    case ErrorCode::cancelled: return "CANCELLED";
    case ErrorCode::enumeration_cap: return "ENUMERATION_CAP";
    case ErrorCode::internal: return "INTERNAL";
  }
  return "INTERNAL";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Malformed N-Triples input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCode::parse_error,
              "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void hash_combine(std::size_t& seed, std::size_t v) {
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

inline constexpr std::string_view kRdfType =
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
inline constexpr std::string_view kRdfsSubClassOf =
    "http://www.w3.org/2000/01/rdf-schema#subClassOf";
inline constexpr std::string_view kOwlThing =
    "http://www.w3.org/2002/07/owl#Thing";
// Reserved predicate holding the materialized reflexive-transitive subclass
// closure. A variable in predicate position never binds to it.
inline constexpr std::string_view kClosurePredicate = "urn:kgx:subclass-closure";

}  // namespace kgx
