#ifndef SMOLHOM_PARALLEL_HPP_
#define SMOLHOM_PARALLEL_HPP_

#include <atomic>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace smolhom {

// Minimal fixed-size worker pool. Tasks write to disjoint outputs and are
// internally sequential, so results are bit-identical for any worker count.
class ThreadPool {
 public:
  explicit ThreadPool(int workers) {
    const int count = workers > 0 ? workers : 1;
    for (int i = 0; i < count - 1; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return static_cast<int>(threads_.size()) + 1; }

  // Run fn(i) for i in [0, n); blocks until done; rethrows the first task
  // exception on the calling thread.
  void parallel_for(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (threads_.empty() || n == 1) {
      for (int i = 0; i < n; ++i) fn(i);
      return;
    }
    std::atomic<int> next{0};
    std::atomic<int> in_flight{static_cast<int>(threads_.size())};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    };
    {
      std::unique_lock lock(mutex_);
      for (std::size_t t = 0; t < threads_.size(); ++t) {
        queue_.push([&body, &in_flight] {
          body();
          in_flight.fetch_sub(1, std::memory_order_release);
        });
      }
    }
    cv_.notify_all();
    body();
    while (in_flight.load(std::memory_order_acquire) > 0) std::this_thread::yield();
    if (error) std::rethrow_exception(error);
  }

 private:
  void worker_loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop();
      }
      task();
    }
  }

  std::vector<std::thread> threads_;
  std::queue<std::function<void()>> queue_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
};

// Process-wide pool, sized once by the CLI --threads flag.
ThreadPool& global_pool();
void set_global_threads(int workers);

}  // namespace smolhom

#endif  // SMOLHOM_PARALLEL_HPP_
