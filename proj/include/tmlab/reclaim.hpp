#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tmlab/instrument.hpp"
#include "tmlab/types.hpp"

namespace tmlab {

enum class trap_decision : std::uint8_t { rollback_retry, escalate };

struct trap_stats {
  std::uint64_t traps_total = 0;
  std::uint64_t traps_recovered = 0;
  std::uint64_t traps_escalated = 0;
};

// Everything a strategy may consult when deciding what a trap means.
// snapshot is refreshed by every successful validation, so
// clock_now != snapshot iff some commit happened since the faulting
// transaction last knew its read-set to be valid.
struct trap_query {
  std::uint64_t clock_now = 0;
  std::uint64_t snapshot = 0;
  std::uint64_t traps_in_run = 0;  // traps seen by this run_tx invocation, this one included
  cell_addr addr{};
  // Re-checks the trapped transaction's read-set against memory right now.
  std::function<bool()> readset_valid_now;
};

class duplicate_registration_error : public std::logic_error {
 public:
  explicit duplicate_registration_error(int tid)
      : std::logic_error("thread " + std::to_string(tid) + " already registered") {}
};

// Memory-reclamation strategy plugged into the engine. commit_hook runs
// inside (or immediately after) the committer's critical section;
// boundary hooks fire at every transaction start, restart and end.
class reclaim_strategy {
 public:
  virtual ~reclaim_strategy() = default;

  virtual const char* name() const = 0;

  virtual void register_thread(int tid) = 0;
  virtual void deregister_thread(int tid) = 0;

  virtual void begin_hook(thread_ctx& ctx) = 0;
  virtual void boundary_hook(thread_ctx& ctx) = 0;
  virtual void commit_hook(thread_ctx& ctx, const std::vector<block_id>& free_log) = 0;
  virtual trap_decision trap_hook(thread_ctx& ctx, const trap_query& q) = 0;

  // Reclamation requested outside any transaction (cases 2 and 3 of the
  // privatize-then-free taxonomy). Strategies differ in whether this is
  // covered; see the concrete classes.
  virtual void nontx_free(thread_ctx& ctx, block_id b) = 0;

  // Bytes parked in deferred-reclamation structures (0 when none exist).
  virtual std::uint64_t deferred_bytes() const = 0;

  // Unconditional shutdown drain; only legal once no thread is registered.
  virtual void drain_all() = 0;

  virtual trap_stats traps() const = 0;
};

}  // namespace tmlab
