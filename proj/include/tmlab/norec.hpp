#pragma once

#include <atomic>
#include <cassert>
#include <chrono>
#include <cstdint>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tmlab/engine.hpp"
#include "tmlab/heap.hpp"
#include "tmlab/instrument.hpp"
#include "tmlab/reclaim.hpp"

namespace tmlab {

class norec_engine;

// One transaction attempt: deferred updates in a redo-log, value-based
// read-set, incremental validation short-circuited by the global commit
// counter. Confined to its owning thread.
class norec_txn final : public txn {
 public:
  norec_txn(norec_txn&&) = delete;
  norec_txn(const norec_txn&) = delete;

  ~norec_txn() override {
    if (status_ == tx_status::active || status_ == tx_status::doomed) abort();
  }

  word read(cell_addr a) override;
  void write(cell_addr a, word w) override;
  cell_addr alloc(std::uint32_t size_cells) override;
  void free_block(block_id b) override;

  // Whole-read-set value validation. Returns false when any entry
  // mismatches (a freed-block comparison counts as mismatch); on success
  // the snapshot is refreshed to the validation time.
  bool validate();

  void commit();
  void abort();

  tx_status status() const noexcept { return status_; }
  std::uint64_t snapshot() const noexcept { return snapshot_; }
  std::uint64_t validations() const noexcept { return validations_; }
  std::uint64_t comparisons() const noexcept { return comparisons_; }
  std::size_t read_set_size() const noexcept { return read_set_.size(); }

 private:
  friend class norec_engine;

  norec_txn(norec_engine& eng, thread_ctx& ctx, std::uint64_t* run_traps);

  struct read_entry {
    cell_addr addr;
    word value;  // the value first read
  };

  void require_active() const {
    assert(status_ == tx_status::active);
  }

  // validate() that throws tx_conflict on mismatch.
  void revalidate_or_conflict() {
    if (!validate()) throw tx_conflict{};
  }

  bool readset_matches_now() const;

  [[noreturn]] void handle_trap(cell_addr a);
  void write_back();
  void release_clock_after_fault();

  norec_engine& eng_;
  thread_ctx& ctx_;
  tx_status status_ = tx_status::active;
  std::uint64_t snapshot_ = 0;

  std::vector<read_entry> read_set_;
  std::unordered_map<cell_addr, std::size_t> read_index_;
  std::vector<std::pair<cell_addr, word>> redo_log_;  // first-write order
  std::unordered_map<cell_addr, std::size_t> redo_index_;
  std::vector<block_id> alloc_log_;
  std::vector<block_id> free_log_;

  std::uint64_t validations_ = 0;
  std::uint64_t comparisons_ = 0;
  std::uint64_t* run_traps_ = nullptr;  // per-run_tx trap counter, may be null
  bool clock_held_ = false;
};

// NOrec-style engine: a single global commit counter (parity-encoded
// writer lock), deferred updates and value-based incremental validation.
class norec_engine final : public engine {
 public:
  norec_engine(heap& h, global_clock& clk, reclaim_strategy& strat)
      : heap_(h), clock_(clk), strategy_(strat) {}

  norec_txn begin(thread_ctx& ctx) { return begin_with(ctx, nullptr); }

  tx_outcome run(thread_ctx& ctx, const tx_body& body,
                 const retry_policy& policy = {}) override {
    std::uint64_t traps_this_run = 0;
    for (std::uint64_t attempt = 0;; ++attempt) {
      norec_txn tx = begin_with(ctx, &traps_this_run);
      try {
        body(tx);
        tx.commit();
        return tx_outcome{tx_outcome::kind::committed, attempt, {}};
      } catch (const tx_conflict&) {
        tx.abort();
        if (attempt >= policy.max_retries)
          return tx_outcome{tx_outcome::kind::retry_limit, attempt + 1, {}};
        backoff(ctx, attempt, policy);
      } catch (const tx_escalate& e) {
        tx.abort();
        irecord(ctx, event_kind::escalation, e.addr);
        return tx_outcome{tx_outcome::kind::application_error, attempt, e.addr};
      } catch (...) {
        // Application-level failure (e.g. heap exhaustion): roll back and
        // let it surface.
        if (tx.status() == tx_status::active || tx.status() == tx_status::doomed)
          tx.abort();
        throw;
      }
    }
  }

  std::string name() const override { return "norec"; }

  engine_counters counters() const override {
    engine_counters c;
    c.commits = commits_.load(std::memory_order_relaxed);
    c.ro_commits = ro_commits_.load(std::memory_order_relaxed);
    c.aborts = aborts_.load(std::memory_order_relaxed);
    c.validations = validations_.load(std::memory_order_relaxed);
    c.comparisons = comparisons_.load(std::memory_order_relaxed);
    return c;
  }

  global_clock& clock() noexcept { return clock_; }
  heap& get_heap() noexcept { return heap_; }
  reclaim_strategy& strategy() noexcept { return strategy_; }

 private:
  friend class norec_txn;

  norec_txn begin_with(thread_ctx& ctx, std::uint64_t* run_traps) {
    if (ctx.in_tx) throw nested_transaction_error{};
    ctx.in_tx = true;
    ++ctx.attempt_counter;
    strategy_.begin_hook(ctx);
    return norec_txn{*this, ctx, run_traps};
  }

  static void backoff(thread_ctx& ctx, std::uint64_t attempt, const retry_policy& p) {
    if (ctx.instr || p.backoff_cap_us == 0) return;  // scheduled mode: deterministic, no sleep
    const std::uint64_t shift = attempt < 10 ? attempt : 10;
    const std::uint64_t us = std::min<std::uint64_t>(p.backoff_cap_us, 1ull << shift);
    std::this_thread::sleep_for(std::chrono::microseconds(us));
  }

  heap& heap_;
  global_clock& clock_;
  reclaim_strategy& strategy_;

  std::atomic<std::uint64_t> commits_{0};
  std::atomic<std::uint64_t> ro_commits_{0};
  std::atomic<std::uint64_t> aborts_{0};
  std::atomic<std::uint64_t> validations_{0};
  std::atomic<std::uint64_t> comparisons_{0};
};

inline norec_txn::norec_txn(norec_engine& eng, thread_ctx& ctx, std::uint64_t* run_traps)
    : eng_(eng), ctx_(ctx), run_traps_(run_traps) {
  // Snapshot must be even: wait out any in-flight commit.
  for (;;) {
    iwait(ctx_, [this] { return (eng_.clock_.load() & 1) == 0; });
    const std::uint64_t s = eng_.clock_.load();
    if ((s & 1) == 0) {
      snapshot_ = s;
      break;
    }
  }
  irecord(ctx_, event_kind::tx_begin, {}, word::scalar(snapshot_));
}

inline bool norec_txn::validate() {
  ++validations_;
  eng_.validations_.fetch_add(1, std::memory_order_relaxed);
  for (;;) {
    iwait(ctx_, [this] { return (eng_.clock_.load() & 1) == 0; });
    const std::uint64_t t = eng_.clock_.load();
    if (t & 1) continue;
    ipoint(ctx_, yield_kind::pre_validate);
    bool ok = true;
    for (const auto& e : read_set_) {
      ++comparisons_;
      eng_.comparisons_.fetch_add(1, std::memory_order_relaxed);
      const auto v = eng_.heap_.try_read_cell(e.addr);
      if (!v || *v != e.value) {  // a freed block reads as mismatch
        ok = false;
        break;
      }
    }
    ipoint(ctx_, yield_kind::post_validate);
    if (!ok) return false;
    if (eng_.clock_.load() == t) {
      snapshot_ = t;
      return true;
    }
    // A commit slipped in during the scan; try again.
  }
}

inline word norec_txn::read(cell_addr a) {
  require_active();
  if (auto it = redo_index_.find(a); it != redo_index_.end())
    return redo_log_[it->second].second;  // read-own-writes
  if (auto it = read_index_.find(a); it != read_index_.end())
    return read_set_[it->second].value;  // duplicate read reuses the first entry
  for (;;) {
    if (eng_.clock_.load() != snapshot_) revalidate_or_conflict();
    ipoint(ctx_, yield_kind::pre_cell_access, access_kind::read, a);
    const auto v = eng_.heap_.try_read_cell(a);
    if (!v) handle_trap(a);
    if (eng_.clock_.load() == snapshot_) {
      read_index_.emplace(a, read_set_.size());
      read_set_.push_back(read_entry{a, *v});
      irecord(ctx_, event_kind::tx_read, a, *v);
      return *v;
    }
    // Clock moved during the read: revalidate and re-read until stable.
  }
}

inline void norec_txn::write(cell_addr a, word w) {
  require_active();
  if (auto it = redo_index_.find(a); it != redo_index_.end()) {
    redo_log_[it->second].second = w;
  } else {
    redo_index_.emplace(a, redo_log_.size());
    redo_log_.emplace_back(a, w);
  }
  irecord(ctx_, event_kind::tx_write, a, w);
}

inline cell_addr norec_txn::alloc(std::uint32_t size_cells) {
  require_active();
  const block_id b = eng_.heap_.alloc(size_cells);  // executed now, logged for rollback
  alloc_log_.push_back(b);
  irecord(ctx_, event_kind::tx_alloc, cell_addr{b, 0}, word::scalar(size_cells));
  return cell_addr{b, 0};
}

inline void norec_txn::free_block(block_id b) {
  require_active();
  free_log_.push_back(b);  // deferred; a double free surfaces at commit
  irecord(ctx_, event_kind::tx_free_logged, cell_addr{b, 0});
}

inline bool norec_txn::readset_matches_now() const {
  for (const auto& e : read_set_) {
    const auto v = eng_.heap_.try_read_cell(e.addr);
    if (!v || *v != e.value) return false;
  }
  return true;
}

inline void norec_txn::handle_trap(cell_addr a) {
  status_ = tx_status::doomed;
  if (run_traps_) ++*run_traps_;
  irecord(ctx_, event_kind::trap, a);
  ipoint(ctx_, yield_kind::trap_entry, access_kind::read, a);
  trap_query q;
  q.clock_now = eng_.clock_.load();
  q.snapshot = snapshot_;
  q.traps_in_run = run_traps_ ? *run_traps_ : 1;
  q.addr = a;
  q.readset_valid_now = [this] { return readset_matches_now(); };
  const trap_decision d = eng_.strategy_.trap_hook(ctx_, q);
  irecord(ctx_, event_kind::trap_decision, a,
          word::scalar(d == trap_decision::escalate ? 1 : 0));
  if (d == trap_decision::rollback_retry) throw tx_conflict{};
  throw tx_escalate{a};
}

inline void norec_txn::write_back() {
  for (const auto& [addr, w] : redo_log_) {
    ipoint(ctx_, yield_kind::pre_cell_access, access_kind::write, addr);
    if (!eng_.heap_.try_write_cell(addr, w)) {
      // Blind write into a block freed since we validated: a wild write.
      release_clock_after_fault();
      status_ = tx_status::doomed;
      throw tx_escalate{addr};
    }
  }
}

inline void norec_txn::release_clock_after_fault() {
  if (clock_held_) {
    eng_.clock_.end_commit(snapshot_ + 2);
    clock_held_ = false;
  }
}

inline void norec_txn::commit() {
  require_active();
  if (redo_log_.empty() && free_log_.empty()) {
    // Read-only fast path: no clock increment, so concurrent readers keep
    // skipping validations. The commit hook still runs to drain any
    // reclamation backlog.
    eng_.strategy_.commit_hook(ctx_, {});
    eng_.strategy_.boundary_hook(ctx_);
    status_ = tx_status::committed;
    ctx_.in_tx = false;
    eng_.commits_.fetch_add(1, std::memory_order_relaxed);
    eng_.ro_commits_.fetch_add(1, std::memory_order_relaxed);
    irecord(ctx_, event_kind::tx_commit, {}, word::scalar(0));
    ipoint(ctx_, yield_kind::post_commit);
    return;
  }
  for (;;) {
    if (eng_.clock_.try_begin_commit(snapshot_)) break;
    revalidate_or_conflict();  // refreshes snapshot_ on success
  }
  clock_held_ = true;
  write_back();
  ipoint(ctx_, yield_kind::pre_commit_hook);
  try {
    eng_.strategy_.commit_hook(ctx_, free_log_);
    eng_.strategy_.boundary_hook(ctx_);
  } catch (...) {
    release_clock_after_fault();
    throw;
  }
  eng_.clock_.end_commit(snapshot_ + 2);
  clock_held_ = false;
  status_ = tx_status::committed;
  ctx_.in_tx = false;
  eng_.commits_.fetch_add(1, std::memory_order_relaxed);
  irecord(ctx_, event_kind::tx_commit, {}, word::scalar(snapshot_ + 2));
  ipoint(ctx_, yield_kind::post_commit);
}

inline void norec_txn::abort() {
  assert(status_ == tx_status::active || status_ == tx_status::doomed);
  release_clock_after_fault();
  for (block_id b : alloc_log_) {
    eng_.heap_.free(b);  // rollback: allocations are returned
    irecord(ctx_, event_kind::free_executed, cell_addr{b, 0});
  }
  read_set_.clear();
  read_index_.clear();
  redo_log_.clear();
  redo_index_.clear();
  alloc_log_.clear();
  free_log_.clear();  // deferred frees are discarded
  status_ = tx_status::aborted;
  ctx_.in_tx = false;
  eng_.aborts_.fetch_add(1, std::memory_order_relaxed);
  eng_.strategy_.boundary_hook(ctx_);
  irecord(ctx_, event_kind::tx_abort);
}

}  // namespace tmlab
