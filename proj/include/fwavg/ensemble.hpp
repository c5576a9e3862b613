#pragma once

#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fwavg {

enum class ExecPolicy { serial, parallel };

// Runs fn(i) for i in [0, n), optionally across OpenMP threads. Exceptions
// thrown by fn are captured per index and the lowest-index one is rethrown
// after the loop finishes, so the behavior matches the serial path.
template <class Fn>
void for_each_index(int n, ExecPolicy policy, Fn&& fn) {
    if (n <= 0) return;
#ifdef _OPENMP
    if (policy == ExecPolicy::parallel && n > 1) {
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
        return;
    }
#endif
    for (int i = 0; i < n; ++i) fn(i);
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace fwavg
