#include "parallel.hpp"

#include <cstdlib>
#include <string>

namespace vlasov_ap::detail {

int configured_threads() {
  const char* env = std::getenv("VLASOV_AP_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  try {
    const int n = std::stoi(env);
    return n > 0 ? n : 0;
  } catch (...) {
    return 0;
  }
}

void apply_thread_cap() {
#if defined(VLASOV_AP_HAVE_OPENMP)
  if (const int n = configured_threads(); n > 0) omp_set_num_threads(n);
#endif
}

void limit_inner_threads([[maybe_unused]] int n) {
#if defined(VLASOV_AP_HAVE_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#endif
}

}  // namespace vlasov_ap::detail
