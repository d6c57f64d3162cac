#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace treelet {

/// CPU time consumed by the calling thread, in seconds.
double thread_cpu_seconds() noexcept;

/// Fixed set of computation lanes. start() hands every lane the same job (called with
/// the lane index); wait() blocks until all lanes finish and rethrows the first error.
class LanePool {
 public:
  explicit LanePool(std::size_t lanes);
  ~LanePool();

  LanePool(const LanePool&) = delete;
  LanePool& operator=(const LanePool&) = delete;

  std::size_t size() const noexcept { return threads_.size(); }

  void start(std::function<void(std::size_t lane)> job);
  void wait();
  void run(std::function<void(std::size_t lane)> job) {
    start(std::move(job));
    wait();
  }

 private:
  void lane_main(std::size_t lane);

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  std::function<void(std::size_t)> job_;
  std::size_t generation_ = 0;
  std::size_t running_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
};

}  // namespace treelet
