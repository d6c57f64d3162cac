#include "treelet/lanes.hpp"

#include <ctime>

namespace treelet {

double thread_cpu_seconds() noexcept {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

LanePool::LanePool(std::size_t lanes) {
  if (lanes == 0) lanes = 1;
  threads_.reserve(lanes);
  for (std::size_t i = 0; i < lanes; ++i) threads_.emplace_back([this, i] { lane_main(i); });
}

LanePool::~LanePool() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void LanePool::start(std::function<void(std::size_t)> job) {
  std::lock_guard lock(mu_);
  job_ = std::move(job);
  running_ = threads_.size();
  error_ = nullptr;
  ++generation_;
  work_cv_.notify_all();
}

void LanePool::wait() {
  std::unique_lock lock(mu_);
  done_cv_.wait(lock, [this] { return running_ == 0; });
  if (error_) {
    auto e = error_;
    error_ = nullptr;
    std::rethrow_exception(e);
  }
}

void LanePool::lane_main(std::size_t lane) {
  std::size_t seen = 0;
  for (;;) {
    std::function<void(std::size_t)>* job = nullptr;
    {
      std::unique_lock lock(mu_);
      work_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      job = &job_;
    }
    try {
      (*job)(lane);
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
    {
      std::lock_guard lock(mu_);
      if (--running_ == 0) done_cv_.notify_all();
    }
  }
}

}  // namespace treelet
