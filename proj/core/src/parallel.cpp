#include "embedfuse/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace embedfuse {

namespace {

std::size_t default_threads() {
    if (const char* env = std::getenv("EMBEDFUSE_THREADS")) {
        try {
            const long parsed = std::stol(env);
            if (parsed > 0) {
                return static_cast<std::size_t>(parsed);
            }
        } catch (const std::exception&) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::atomic<std::size_t>& configured() {
    static std::atomic<std::size_t> value{0};
    return value;
}

} // namespace

std::size_t thread_count() {
    const std::size_t n = configured().load();
    return n == 0 ? default_threads() : n;
}

void set_thread_count(std::size_t n) {
    configured().store(n);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body, std::size_t threads) {
    if (n == 0) {
        return;
    }
    std::size_t workers = threads == 0 ? thread_count() : threads;
    workers = std::min(workers, n);
    if (workers <= 1) {
        body(0, n);
        return;
    }

    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_lock;
    pool.reserve(workers);
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t end = std::min(n, start + chunk);
        pool.emplace_back([&, start, end] {
            try {
                body(start, end);
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_lock);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace embedfuse
