#include "stmforge/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace stmforge {

namespace {
int g_threads = 1;
} // namespace

void set_threads(int n) {
    g_threads = n < 1 ? 1 : n;
}

int threads() {
    return g_threads;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int workers = g_threads;
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int count = static_cast<int>(n < static_cast<std::size_t>(workers) ? n : static_cast<std::size_t>(workers));
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count - 1; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
}

} // namespace stmforge
