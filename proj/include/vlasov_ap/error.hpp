#pragma once

#include <stdexcept>
#include <string>

namespace vlasov_ap {

enum class ErrorCode {
  InvalidArgument,
  Config,
  NonZeroMeanInput,
  StabilityFailure,
  ZeroField,
  NonMeanFreeTension,
  ZeroReference,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C API can map it onto a status value without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace vlasov_ap

#include <functional>

namespace vlasov_ap {

// Non-fatal diagnostics (asymmetric density, mass near the boundary, ...).
// The default handler writes to stderr. Returns the previous handler.
using WarningHandler = std::function<void(const std::string&)>;
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);
// Number of warnings emitted since process start.
long warning_count() noexcept;

}  // namespace vlasov_ap
