#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace phi4 {

// Evaluates fn(i) for i in [0, count) on `workers` threads. Results land in a
// vector indexed by i and any reduction happens on the sorted output, so the
// result is bit-identical for every worker count. The first exception thrown
// by a task is rethrown after all threads join.
template <class T, class Fn>
std::vector<T> parallel_map(int count, int workers, Fn&& fn) {
    if (count < 0 || workers < 1)
        throw std::invalid_argument("parallel_map: count >= 0, workers >= 1 required");
    std::vector<T> out(static_cast<size_t>(count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) out[static_cast<size_t>(i)] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto run = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                out[static_cast<size_t>(i)] = fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(run);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace phi4
