#pragma once

#if defined(VLASOV_AP_HAVE_OPENMP)
#include <omp.h>
#define VLASOV_AP_PARALLEL_FOR _Pragma("omp parallel for schedule(static)")
#else
#define VLASOV_AP_PARALLEL_FOR
#endif

namespace vlasov_ap::detail {

// Worker cap from VLASOV_AP_THREADS (0 or unset: runtime default).
int configured_threads();
void apply_thread_cap();
// Caps the OpenMP team size for parallel regions started by the calling thread.
void limit_inner_threads(int n);

}  // namespace vlasov_ap::detail
