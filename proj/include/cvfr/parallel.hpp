#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

// Minimal persistent worker pool. Work items are index chunks; callers are
// responsible for writing disjoint outputs per chunk so results do not depend
// on the worker count. With threads == 1 everything runs on the calling
// thread and no workers exist.

namespace cvfr {

class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int threads() const { return static_cast<int>(workers_.size()) + 1; }

    /// Resize the pool; must not be called while a parallel region runs.
    void set_threads(int n) {
        n = std::max(1, n);
        if (n == threads()) return;
        shutdown();
        spawn(n - 1);
    }

    /// Runs fn(chunk) for chunk in [0, n_chunks); blocks until all finish.
    /// The calling thread participates. First exception is rethrown.
    void run_chunks(int n_chunks, const std::function<void(int)>& fn) {
        if (n_chunks <= 0) return;
        if (workers_.empty() || n_chunks == 1) {
            for (int i = 0; i < n_chunks; ++i) fn(i);
            return;
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            job_ = &fn;
            job_total_ = n_chunks;
            next_chunk_.store(0, std::memory_order_relaxed);
            unfinished_workers_ = static_cast<int>(workers_.size());
            error_ = nullptr;
            ++generation_;
        }
        cv_work_.notify_all();
        consume(fn, n_chunks);
        std::unique_lock<std::mutex> lock(mutex_);
        cv_done_.wait(lock, [&] { return unfinished_workers_ == 0; });
        job_ = nullptr;
        if (error_) std::rethrow_exception(error_);
    }

    ~ThreadPool() { shutdown(); }

private:
    ThreadPool() {
        unsigned hw = std::thread::hardware_concurrency();
        spawn(hw > 1 ? static_cast<int>(hw) - 1 : 0);
    }

    void spawn(int n_workers) {
        stop_ = false;
        for (int w = 0; w < n_workers; ++w) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    void shutdown() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        cv_work_.notify_all();
        for (auto& t : workers_) t.join();
        workers_.clear();
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* fn = nullptr;
            int total = 0;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_work_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                fn = job_;
                total = job_total_;
            }
            consume(*fn, total);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                if (--unfinished_workers_ == 0) cv_done_.notify_all();
            }
        }
    }

    void consume(const std::function<void(int)>& fn, int total) {
        int i;
        while ((i = next_chunk_.fetch_add(1, std::memory_order_relaxed)) < total) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mutex_);
                if (!error_) error_ = std::current_exception();
            }
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_work_, cv_done_;
    std::vector<std::thread> workers_;
    const std::function<void(int)>* job_ = nullptr;
    int job_total_ = 0;
    std::atomic<int> next_chunk_{0};
    int unfinished_workers_ = 0;
    std::uint64_t generation_ = 0;
    std::exception_ptr error_;
    bool stop_ = false;
};

inline void set_num_threads(int n) { ThreadPool::instance().set_threads(n); }
inline int num_threads() { return ThreadPool::instance().threads(); }

/// Splits [0, n) into contiguous ranges and runs fn(begin, end) for each.
/// Chunk boundaries may depend on the pool size, so callers must compute
/// each output element the same way regardless of which range covers it
/// (disjoint output rows with a fixed inner reduction order).
template <class Fn>
void parallel_for(std::int64_t n, std::int64_t grain, Fn&& fn) {
    if (n <= 0) return;
    grain = std::max<std::int64_t>(1, grain);
    const int max_chunks = ThreadPool::instance().threads();
    std::int64_t n_chunks = std::min<std::int64_t>(max_chunks, (n + grain - 1) / grain);
    if (n_chunks <= 1) {
        fn(std::int64_t{0}, n);
        return;
    }
    const std::int64_t base = n / n_chunks, extra = n % n_chunks;
    ThreadPool::instance().run_chunks(static_cast<int>(n_chunks), [&](int c) {
        const std::int64_t begin = c * base + std::min<std::int64_t>(c, extra);
        const std::int64_t end = begin + base + (c < extra ? 1 : 0);
        fn(begin, end);
    });
}

} // namespace cvfr
