#include "npmd/parallel.hpp"

#include <atomic>

namespace npmd {

namespace {
std::atomic<int> g_threads{0};
}

void set_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int threads() { return g_threads.load(); }

}  // namespace npmd
