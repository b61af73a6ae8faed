#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace npmd {

// Worker count used by parallel_for. 0 = library default (all cores).
void set_threads(int n);
int threads();

// Data-parallel map over [0, n). Iterations must be independent; callers
// that reduce results do so afterwards in index order, so output bits do
// not depend on the thread count.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
#ifdef _OPENMP
    if (threads() != 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads() > 0 ? threads() : omp_get_max_threads())
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            f(static_cast<std::size_t>(i));
        }
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace npmd
