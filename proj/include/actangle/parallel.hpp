#pragma once

#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace actangle {

/// Selects the OpenMP kernel or the serial reference loop. Both produce identical results:
/// every iteration writes only its own slot and merges happen afterwards in index order.
enum class Execution { serial, parallel };

/// Runs body(i) for i in [0, count). The exception thrown by the lowest failing index
/// is rethrown after the loop, so error reporting does not depend on scheduling.
template <class Body>
void for_each_index(Execution exec, long count, Body&& body) {
    std::vector<std::exception_ptr> errors(count > 0 ? count : 0);
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        for (long i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline void set_thread_count(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace actangle
