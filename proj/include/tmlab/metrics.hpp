#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace tmlab {

struct metric_sample {
  std::uint64_t t_ns = 0;  // monotonic, relative to run start
  std::uint64_t m_bytes = 0;
};

// Time series m(t) of heap consumption: live bytes plus the strategy's
// deferred bytes. Timestamps strictly increase; the first sample sits at
// t_start and the last at t_end.
struct metrics_trace {
  std::vector<metric_sample> samples;
  std::uint64_t t_start_ns = 0;
  std::uint64_t t_end_ns = 0;

  std::uint64_t m_max() const {
    std::uint64_t m = 0;
    for (const auto& s : samples) m = std::max(m, s.m_bytes);
    return m;
  }
};

class degenerate_run_error : public std::runtime_error {
 public:
  degenerate_run_error() : std::runtime_error("t_end == t_start: nothing to integrate") {}
};

// Time-normalized integral of m(t) over the run. m is right-continuous
// and piecewise constant between samples, so the step integral is exact.
inline double compute_mbar(const metrics_trace& tr) {
  if (tr.samples.empty()) throw degenerate_run_error{};
  if (tr.t_end_ns == tr.t_start_ns) throw degenerate_run_error{};
  unsigned __int128 acc = 0;
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    const std::uint64_t t0 = tr.samples[i].t_ns;
    const std::uint64_t t1 =
        i + 1 < tr.samples.size() ? tr.samples[i + 1].t_ns : tr.t_end_ns;
    if (t1 > t0) acc += static_cast<unsigned __int128>(tr.samples[i].m_bytes) * (t1 - t0);
  }
  return static_cast<double>(acc) /
         static_cast<double>(tr.t_end_ns - tr.t_start_ns);
}

// Samples live + deferred bytes at every alloc/free/defer event and on a
// timer floor. Event paths update the mirrors and append; the trace is
// assembled at stop().
class memory_sampler {
 public:
  explicit memory_sampler(std::chrono::nanoseconds timer_floor = std::chrono::milliseconds(1))
      : floor_(timer_floor) {}

  ~memory_sampler() {
    if (running_.load()) stop();
  }

  void start(std::uint64_t initial_live_bytes) {
    t0_ = std::chrono::steady_clock::now();
    live_.store(initial_live_bytes, std::memory_order_relaxed);
    deferred_.store(0, std::memory_order_relaxed);
    running_.store(true);
    {
      std::lock_guard<std::mutex> lk(mu_);
      samples_.clear();
      samples_.push_back({0, initial_live_bytes});
      last_t_ = 0;
    }
    timer_ = std::thread([this] {
      std::unique_lock<std::mutex> lk(stop_mu_);
      while (running_.load(std::memory_order_acquire)) {
        if (stop_cv_.wait_for(lk, floor_, [this] { return !running_.load(); })) break;
        append_now();
      }
    });
  }

  void on_live_bytes(std::uint64_t v) {
    live_.store(v, std::memory_order_relaxed);
    append_now();
  }

  void on_deferred_bytes(std::uint64_t v) {
    deferred_.store(v, std::memory_order_relaxed);
    append_now();
  }

  metrics_trace stop() {
    {
      std::lock_guard<std::mutex> lk(stop_mu_);
      running_.store(false, std::memory_order_release);
    }
    stop_cv_.notify_all();
    if (timer_.joinable()) timer_.join();
    metrics_trace tr;
    std::lock_guard<std::mutex> lk(mu_);
    append_locked(now_ns());
    tr.samples = std::move(samples_);
    samples_.clear();
    tr.t_start_ns = 0;
    tr.t_end_ns = tr.samples.back().t_ns;
    return tr;
  }

 private:
  std::uint64_t now_ns() const {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now() - t0_)
            .count());
  }

  void append_now() {
    if (!running_.load(std::memory_order_acquire)) return;
    std::lock_guard<std::mutex> lk(mu_);
    append_locked(now_ns());
  }

  void append_locked(std::uint64_t t) {
    if (t <= last_t_) t = last_t_ + 1;  // timestamps strictly increase
    last_t_ = t;
    samples_.push_back(
        {t, live_.load(std::memory_order_relaxed) + deferred_.load(std::memory_order_relaxed)});
  }

  std::chrono::nanoseconds floor_;
  std::chrono::steady_clock::time_point t0_;
  std::atomic<std::uint64_t> live_{0};
  std::atomic<std::uint64_t> deferred_{0};
  std::atomic<bool> running_{false};
  std::thread timer_;
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  std::mutex mu_;
  std::vector<metric_sample> samples_;
  std::uint64_t last_t_ = 0;
};

}  // namespace tmlab
