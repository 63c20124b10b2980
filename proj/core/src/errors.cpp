#include "keydyn/errors.hpp"

namespace keydyn {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine:
      return "MalformedLine";
    case ErrorCode::UnknownCode:
      return "UnknownCode";
    case ErrorCode::NegativeTimestamp:
      return "NegativeTimestamp";
    case ErrorCode::IoError:
      return "IoError";
    case ErrorCode::EmptySession:
      return "EmptySession";
    case ErrorCode::ZeroDuration:
      return "ZeroDuration";
    case ErrorCode::AllFeaturesDropped:
      return "AllFeaturesDropped";
    case ErrorCode::SingleClassInput:
      return "SingleClassInput";
    case ErrorCode::EmptyClassFeature:
      return "EmptyClassFeature";
    case ErrorCode::UnknownFeature:
      return "UnknownFeature";
    case ErrorCode::NegativeAfterShift:
      return "NegativeAfterShift";
    case ErrorCode::KTooLarge:
      return "KTooLarge";
    case ErrorCode::TooFewSamples:
      return "TooFewSamples";
    case ErrorCode::NonBinaryLabels:
      return "NonBinaryLabels";
    case ErrorCode::InvalidConfig:
      return "InvalidConfig";
    case ErrorCode::NotEnoughNormals:
      return "NotEnoughNormals";
    case ErrorCode::DegenerateData:
      return "DegenerateData";
    case ErrorCode::EmptySplit:
      return "EmptySplit";
    case ErrorCode::LengthMismatch:
      return "LengthMismatch";
    case ErrorCode::InvalidProfile:
      return "InvalidProfile";
    case ErrorCode::MissingInput:
      return "MissingInput";
    case ErrorCode::ConfigInvalid:
      return "ConfigInvalid";
    case ErrorCode::ModelMismatch:
      return "ModelMismatch";
  }
  return "UnknownError";
}

}  // namespace keydyn
