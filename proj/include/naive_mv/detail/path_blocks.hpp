#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace naive_mv {

template <typename Partial>
void run_path_blocks(std::size_t path_count, std::size_t threads, const std::function<Partial()>& make,
                     const std::function<void(std::size_t, std::size_t, Partial&)>& process,
                     const std::function<void(Partial&&)>& merge) {
    const std::size_t blocks = (path_count + kPathsPerBlock - 1) / kPathsPerBlock;
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, blocks));

    auto run_block = [&](std::size_t b, Partial& part) {
        const std::size_t first = b * kPathsPerBlock;
        process(first, std::min(path_count, first + kPathsPerBlock), part);
    };

    if (workers == 1) {
        for (std::size_t b = 0; b < blocks; ++b) {
            Partial part = make();
            run_block(b, part);
            merge(std::move(part));
        }
        return;
    }

    // Finished blocks wait in `pending` until every earlier block has been merged.
    std::atomic<std::size_t> next_block{0};
    std::mutex mu;
    std::condition_variable window;
    std::map<std::size_t, Partial> pending;
    std::size_t next_merge = 0;
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t b = next_block.fetch_add(1);
            if (b >= blocks) return;
            try {
                {
                    // bound the out-of-order backlog to a few blocks per worker
                    std::unique_lock lock(mu);
                    window.wait(lock, [&] { return failure || b < next_merge + 4 * workers; });
                    if (failure) return;
                }
                Partial part = make();
                run_block(b, part);
                std::unique_lock lock(mu);
                pending.emplace(b, std::move(part));
                while (!pending.empty() && pending.begin()->first == next_merge) {
                    merge(std::move(pending.begin()->second));
                    pending.erase(pending.begin());
                    ++next_merge;
                }
                window.notify_all();
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                window.notify_all();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace naive_mv
