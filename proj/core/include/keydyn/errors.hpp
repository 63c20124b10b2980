#pragma once

#include <stdexcept>
#include <string>

namespace keydyn {

// Error taxonomy shared by all modules. Codes group into data errors
// (parsing, empty inputs), config/usage errors and model errors; the CLI
// maps the group to its exit code.
enum class ErrorCode {
  // events
  MalformedLine,
  UnknownCode,
  NegativeTimestamp,
  IoError,
  EmptySession,
  // features
  ZeroDuration,
  // preprocess
  AllFeaturesDropped,
  SingleClassInput,
  EmptyClassFeature,
  UnknownFeature,
  NegativeAfterShift,
  KTooLarge,
  // supervised
  TooFewSamples,
  NonBinaryLabels,
  InvalidConfig,
  // anomaly
  NotEnoughNormals,
  DegenerateData,
  // metrics
  EmptySplit,
  LengthMismatch,
  // synthgen
  InvalidProfile,
  // cli
  MissingInput,
  ConfigInvalid,
  ModelMismatch,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

const char* error_name(ErrorCode code);

}  // namespace keydyn
