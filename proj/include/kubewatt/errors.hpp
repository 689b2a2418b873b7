#pragma once

#include <stdexcept>
#include <string>

namespace kubewatt {

enum class ErrorKind {
  // power/metrics collectors
  Unreachable,
  AuthFailed,
  SchemaMismatch,
  EmptyResponse,
  // attribution
  MissingProfile,
  SampleSkew,
  // calibration
  ClusterNotEmpty,
  InsufficientSamples,
  DegenerateData,
  NegativeIntercept,
  MaxRoundsExceeded,
  // simulator
  OutOfRange,
  // config / serving
  ParseError,
  ValidationError,
  BindFailed,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::AuthFailed: return "AuthFailed";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::EmptyResponse: return "EmptyResponse";
    case ErrorKind::MissingProfile: return "MissingProfile";
    case ErrorKind::SampleSkew: return "SampleSkew";
    case ErrorKind::ClusterNotEmpty: return "ClusterNotEmpty";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::NegativeIntercept: return "NegativeIntercept";
    case ErrorKind::MaxRoundsExceeded: return "MaxRoundsExceeded";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::BindFailed: return "BindFailed";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace kubewatt
