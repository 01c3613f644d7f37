#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace involukit {

enum class ErrorCode {
  InvalidArgument,
  DegenerateHistogram,
  GeometryMismatch,
  EmptyTissue,
  ZeroAdjustedArea,
  NoRegions,
  DegenerateVariance,
  DegenerateAgreement,
  ZeroVariance,
  AllValuesIdentical,
  ZeroMarginal,
  PlacementExhausted,
  MalformedXml,
  UnknownGroup,
  UnreadableInput,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace involukit
