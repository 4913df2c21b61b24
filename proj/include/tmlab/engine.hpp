#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "tmlab/instrument.hpp"
#include "tmlab/types.hpp"

namespace tmlab {

// The single global commit counter doubling as the writer lock:
// even = no commit in progress, odd = one committer inside the
// write-back critical section.
class global_clock {
 public:
  std::uint64_t load() const noexcept { return v_.load(std::memory_order_acquire); }

  bool is_even() const noexcept { return (load() & 1) == 0; }

  // even -> odd transition; at most one thread succeeds per value.
  bool try_begin_commit(std::uint64_t expected_even) noexcept {
    return v_.compare_exchange_strong(expected_even, expected_even + 1,
                                      std::memory_order_acq_rel,
                                      std::memory_order_acquire);
  }

  void end_commit(std::uint64_t even_value) noexcept {
    v_.store(even_value, std::memory_order_release);
  }

 private:
  std::atomic<std::uint64_t> v_{0};
};

class nested_transaction_error : public std::logic_error {
 public:
  nested_transaction_error()
      : std::logic_error("transaction already active on this thread") {}
};

// Read-set invalid: the transaction aborts and the retry loop restarts it.
struct tx_conflict {};

// Genuine application error surfaced by the trap decision rule.
struct tx_escalate {
  cell_addr addr;
};

enum class tx_status : std::uint8_t { active, committed, aborted, doomed };

struct tx_outcome {
  enum class kind : std::uint8_t { committed, retry_limit, application_error };
  kind k = kind::committed;
  std::uint64_t retries = 0;   // aborted attempts before the final one
  cell_addr fault{};           // application_error only

  bool committed() const noexcept { return k == kind::committed; }
  bool application_error() const noexcept { return k == kind::application_error; }
};

struct retry_policy {
  // Number of retries after the first attempt; ~0 = unlimited.
  std::uint64_t max_retries = ~0ull;
  // Exponential backoff cap in microseconds for free-running mode;
  // scheduled mode never sleeps.
  std::uint64_t backoff_cap_us = 1000;
};

// Operations available inside a transaction body. The body may run many
// times; side effects must go through this interface only.
class txn {
 public:
  virtual ~txn() = default;
  virtual word read(cell_addr a) = 0;
  virtual void write(cell_addr a, word w) = 0;
  virtual cell_addr alloc(std::uint32_t size_cells) = 0;
  virtual void free_block(block_id b) = 0;
};

using tx_body = std::function<void(txn&)>;

struct engine_counters {
  std::uint64_t commits = 0;      // committed transactions, read-only included
  std::uint64_t ro_commits = 0;   // committed without touching the clock
  std::uint64_t aborts = 0;
  std::uint64_t validations = 0;  // whole-read-set validation calls
  std::uint64_t comparisons = 0;  // individual read-set entry comparisons
};

class engine {
 public:
  virtual ~engine() = default;
  virtual tx_outcome run(thread_ctx& ctx, const tx_body& body,
                         const retry_policy& policy = {}) = 0;
  virtual std::string name() const = 0;
  virtual engine_counters counters() const = 0;
};

}  // namespace tmlab
