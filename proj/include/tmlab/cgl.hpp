#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>

#include "tmlab/engine.hpp"
#include "tmlab/heap.hpp"
#include "tmlab/instrument.hpp"

namespace tmlab {

// Pessimistic baseline: one global lock serializes every critical
// section. Reads and writes hit the heap in place, frees execute
// immediately, and no abort path exists; a wild read is an immediate
// application error.
class cgl_engine final : public engine {
 public:
  explicit cgl_engine(heap& h) : heap_(h) {}

  tx_outcome run(thread_ctx& ctx, const tx_body& body,
                 const retry_policy& = {}) override {
    if (ctx.in_tx) throw nested_transaction_error{};
    acquire(ctx);
    ctx.in_tx = true;
    ++ctx.attempt_counter;
    irecord(ctx, event_kind::tx_begin);
    cgl_txn tx{*this, ctx};
    try {
      body(tx);
    } catch (const access_violation& v) {
      irecord(ctx, event_kind::trap, v.addr);
      irecord(ctx, event_kind::escalation, v.addr);
      ctx.in_tx = false;
      release();
      return tx_outcome{tx_outcome::kind::application_error, 0, v.addr};
    } catch (...) {
      ctx.in_tx = false;
      release();
      throw;
    }
    irecord(ctx, event_kind::tx_commit);
    ctx.in_tx = false;
    release();
    ipoint(ctx, yield_kind::post_commit);
    commits_.fetch_add(1, std::memory_order_relaxed);
    return tx_outcome{tx_outcome::kind::committed, 0, {}};
  }

  std::string name() const override { return "cgl"; }

  // Aborts, validations and traps are identically zero by construction.
  engine_counters counters() const override {
    engine_counters c;
    c.commits = commits_.load(std::memory_order_relaxed);
    return c;
  }

 private:
  class cgl_txn final : public txn {
   public:
    cgl_txn(cgl_engine& eng, thread_ctx& ctx) : eng_(eng), ctx_(ctx) {}

    word read(cell_addr a) override {
      ipoint(ctx_, yield_kind::pre_cell_access, access_kind::read, a);
      const word w = eng_.heap_.read_cell(a);
      irecord(ctx_, event_kind::tx_read, a, w);
      return w;
    }

    void write(cell_addr a, word w) override {
      ipoint(ctx_, yield_kind::pre_cell_access, access_kind::write, a);
      eng_.heap_.write_cell(a, w);
      irecord(ctx_, event_kind::tx_write, a, w);
    }

    cell_addr alloc(std::uint32_t size_cells) override {
      const block_id b = eng_.heap_.alloc(size_cells);
      irecord(ctx_, event_kind::tx_alloc, cell_addr{b, 0}, word::scalar(size_cells));
      return cell_addr{b, 0};
    }

    void free_block(block_id b) override {
      eng_.heap_.free(b);  // immediate: dirty reads cannot exist
      irecord(ctx_, event_kind::free_executed, cell_addr{b, 0});
    }

   private:
    cgl_engine& eng_;
    thread_ctx& ctx_;
  };

  void acquire(thread_ctx& ctx) {
    for (;;) {
      iwait(ctx, [this] { return !locked_.load(std::memory_order_acquire); });
      bool expected = false;
      if (locked_.compare_exchange_strong(expected, true, std::memory_order_acq_rel))
        return;
    }
  }

  void release() { locked_.store(false, std::memory_order_release); }

  heap& heap_;
  std::atomic<bool> locked_{false};
  std::atomic<std::uint64_t> commits_{0};
};

}  // namespace tmlab
