#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace apifreq {

enum class ErrorCode {
  MalformedJson,
  SchemaMismatch,
  IdMismatch,
  UnknownLabelToken,
  MalformedManifest,
  TraceMissing,
  EmptyClass,
  DegenerateSplit,
  EmptyVocabulary,
  EmptyNode,
  EmptyMatrix,
  DimensionMismatch,
  VersionMismatch,
  CorruptModel,
  LengthMismatch,
  EmptyInput,
  SingleClass,
  NoPositives,
  InvalidSpec,
  InvalidConfig,
  PartialSweep,
  IoFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Domain error. what() always starts with the error code name, e.g.
/// "DimensionMismatch: row 3 has 12 columns, expected 10".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Re-throws `e` with `context` prepended to the detail, keeping the code.
[[noreturn]] void rethrow_with_context(const Error& e, std::string_view context);

}  // namespace apifreq
