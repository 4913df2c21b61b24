#pragma once

#include <atomic>
#include <cassert>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tmlab/engine.hpp"
#include "tmlab/heap.hpp"
#include "tmlab/reclaim.hpp"

namespace tmlab {

struct trap_options {
  // Forces escalation after this many traps within one run_tx invocation,
  // bounding retry storms where commit traffic keeps masking a wild access.
  std::uint64_t trap_ceiling = 1000;
};

// Direct reclamation with recoverable access-violation handling.
//
// Frees execute immediately at commit; there is no deferral structure.
// A trapped transactional access is first explained as a conflict when
// the commit counter moved since the last validation (rollback and
// retry); with a quiet counter the read-set is provably valid and the
// fault is escalated as a genuine application error.
//
// Non-transactional frees run inside a tiny commit-counter critical
// section, so a doomed reader that traps on them still sees a moved
// counter and recovers; this covers the privatize-then-free cases that
// happen outside transactions.
class trap_reclaim final : public reclaim_strategy {
 public:
  trap_reclaim(heap& h, global_clock& clk, trap_options opt = {})
      : heap_(h), clock_(clk), opt_(opt) {}

  const char* name() const override { return "trap"; }

  void register_thread(int) override {}
  void deregister_thread(int) override {}
  void begin_hook(thread_ctx&) override {}
  void boundary_hook(thread_ctx&) override {}

  void commit_hook(thread_ctx& ctx, const std::vector<block_id>& free_log) override {
    for (block_id b : free_log) {
      heap_.free(b);  // double free signals an application bug
      irecord(ctx, event_kind::free_executed, cell_addr{b, 0});
    }
  }

  trap_decision trap_hook(thread_ctx&, const trap_query& q) override {
    traps_total_.fetch_add(1, std::memory_order_relaxed);
    if (q.clock_now != q.snapshot && q.traps_in_run <= opt_.trap_ceiling) {
      traps_recovered_.fetch_add(1, std::memory_order_relaxed);
      return trap_decision::rollback_retry;
    }
#ifndef NDEBUG
    // Quiet counter: the conflict explanation is exhausted, the read-set
    // must still be valid.
    if (q.clock_now == q.snapshot && q.readset_valid_now)
      assert(q.readset_valid_now());
#endif
    traps_escalated_.fetch_add(1, std::memory_order_relaxed);
    return trap_decision::escalate;
  }

  // Direct free outside a transaction, guarded by the commit counter.
  // Callers privatize first; a racing transactional reader traps with a
  // moved counter and recovers via trap_hook.
  void nontx_free(thread_ctx& ctx, block_id b) override {
    if (ctx.in_tx) throw std::logic_error("nontx_free inside a transaction");
    for (;;) {
      iwait(ctx, [this] { return (clock_.load() & 1) == 0; });
      const std::uint64_t c = clock_.load();
      if (c & 1) continue;
      if (!clock_.try_begin_commit(c)) continue;
      ipoint(ctx, yield_kind::pre_commit_hook);
      try {
        heap_.free(b);
      } catch (...) {
        clock_.end_commit(c + 2);
        throw;
      }
      irecord(ctx, event_kind::free_executed, cell_addr{b, 0});
      clock_.end_commit(c + 2);
      ipoint(ctx, yield_kind::post_commit);
      return;
    }
  }

  // Non-transactional read of possibly privatized data: nullopt is the
  // PRIVATIZED indication instead of a fault.
  std::optional<word> guarded_nontx_read(thread_ctx& ctx, cell_addr a) const {
    if (ctx.in_tx) throw std::logic_error("guarded_nontx_read inside a transaction");
    ipoint(ctx, yield_kind::pre_cell_access, access_kind::read, a);
    return heap_.try_read_cell(a);
  }

  std::uint64_t deferred_bytes() const override { return 0; }

  void drain_all() override {}

  trap_stats traps() const override {
    trap_stats s;
    s.traps_total = traps_total_.load(std::memory_order_relaxed);
    s.traps_recovered = traps_recovered_.load(std::memory_order_relaxed);
    s.traps_escalated = traps_escalated_.load(std::memory_order_relaxed);
    return s;
  }

 private:
  heap& heap_;
  global_clock& clock_;
  trap_options opt_;
  std::atomic<std::uint64_t> traps_total_{0};
  std::atomic<std::uint64_t> traps_recovered_{0};
  std::atomic<std::uint64_t> traps_escalated_{0};
};

}  // namespace tmlab
