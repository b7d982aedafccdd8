// stencilforge - worker threads with collective phases and barriers
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_WORKERS_HPP
#define SFORGE_WORKERS_HPP

#include <barrier>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace sforge::grid {

// A fixed team of workers executing collective phases.  The calling thread
// acts as worker 0; workers 1..n-1 are persistent threads.  With a single
// worker everything runs inline and sync() is free.
//
// Bodies passed to run() may call sync() to line up with the other workers.
// An exception thrown by a body is rethrown on the caller once the phase
// drains, but bodies must not throw between paired sync() calls: the other
// workers would wait forever.
class worker_group {
public:
  explicit worker_group(int count)
      : count_(count), barrier_(count >= 1 ? count : 1) {
    if (count_ < 1) throw std::invalid_argument("worker count must be >= 1");
    threads_.reserve(static_cast<std::size_t>(count_ - 1));
    for (int w = 1; w < count_; ++w)
      threads_.emplace_back([this, w] { thread_main(w); });
  }

  worker_group(const worker_group&) = delete;
  worker_group& operator=(const worker_group&) = delete;

  ~worker_group() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return count_; }

  void run(const std::function<void(int)>& body) {
    if (count_ == 1) {
      body(0);
      return;
    }
    {
      std::lock_guard lk(mu_);
      task_ = &body;
      done_ = 0;
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    invoke(0);
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return done_ == count_; });
    task_ = nullptr;
    if (error_) {
      auto e = error_;
      error_ = nullptr;
      std::rethrow_exception(e);
    }
  }

  // Barrier across all workers; call only from inside a run() body.
  void sync() {
    if (count_ > 1) barrier_.arrive_and_wait();
  }

private:
  int count_;
  std::vector<std::thread> threads_;
  std::barrier<> barrier_;

  std::mutex mu_;
  std::condition_variable cv_;
  const std::function<void(int)>* task_ = nullptr;
  std::uint64_t generation_ = 0;
  int done_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;

  void invoke(int w) {
    try {
      (*task_)(w);
    } catch (...) {
      std::lock_guard lk(mu_);
      if (!error_) error_ = std::current_exception();
    }
    {
      std::lock_guard lk(mu_);
      ++done_;
    }
    cv_.notify_all();
  }

  void thread_main(int w) {
    std::uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      invoke(w);
    }
  }
};

}  // namespace sforge::grid

#endif  // SFORGE_WORKERS_HPP
