#pragma once

#include <stdexcept>
#include <string>

namespace sintent {

enum class ErrorCode {
  kDimension,
  kDivergence,
  kUsage,
  kEmptyInput,
  kSkip,
  kParse,
  kConfig,
  kIo,
  kNotApplicable,
  kVocabMismatch,
};

inline const char* code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kDimension: return "E_DIMENSION";
    case ErrorCode::kDivergence: return "E_DIVERGENCE";
    case ErrorCode::kUsage: return "E_USAGE";
    case ErrorCode::kEmptyInput: return "E_EMPTY_INPUT";
    case ErrorCode::kSkip: return "E_SKIP";
    case ErrorCode::kParse: return "E_PARSE";
    case ErrorCode::kConfig: return "E_CONFIG";
    case ErrorCode::kIo: return "E_IO";
    case ErrorCode::kNotApplicable: return "E_NOT_APPLICABLE";
    case ErrorCode::kVocabMismatch: return "E_VOCAB_MISMATCH";
  }
  return "E_UNKNOWN";
}

/// Every failure in the library surfaces as an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sintent
