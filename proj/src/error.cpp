#include "vlasov_ap/error.hpp"

namespace vlasov_ap {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::NonZeroMeanInput: return "NonZeroMeanInput";
    case ErrorCode::StabilityFailure: return "StabilityFailure";
    case ErrorCode::ZeroField: return "ZeroField";
    case ErrorCode::NonMeanFreeTension: return "NonMeanFreeTension";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::Io: return "IoError";
  }
  return "Unknown";
}

}  // namespace vlasov_ap

#include <atomic>
#include <iostream>
#include <mutex>

namespace vlasov_ap {

namespace {
std::mutex warn_mutex;
std::atomic<long> warn_counter{0};
WarningHandler& handler_slot() {
  static WarningHandler h = [](const std::string& m) { std::cerr << "vlasov-ap: warning: " << m << '\n'; };
  return h;
}
}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(warn_mutex);
  WarningHandler previous = std::move(handler_slot());
  handler_slot() = std::move(handler);
  return previous;
}

void warn(const std::string& message) {
  ++warn_counter;
  std::lock_guard lock(warn_mutex);
  if (handler_slot()) handler_slot()(message);
}

long warning_count() noexcept { return warn_counter.load(); }

}  // namespace vlasov_ap
