#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "tmlab/bundle.hpp"
#include "tmlab/opacity.hpp"
#include "tmlab/queue_workload.hpp"
#include "tmlab/sched.hpp"

// Scheduled regression programs shared by the test suite and the check
// command: the privatize-commit-free window, the uncovered
// non-transactional free, wild reads, and the enumeration micro-programs.

namespace tmlab::regress {

// Park only on transactional reads and commit hooks; coarse enough to
// keep exhaustive enumeration tractable.
inline sched_options coarse_mask(std::size_t max_picks = 256) {
  sched_options o;
  o.filter = [](const yield_info& y) {
    return (y.kind == yield_kind::pre_cell_access && y.access == access_kind::read) ||
           y.kind == yield_kind::pre_commit_hook;
  };
  o.max_picks = max_picks;
  return o;
}

inline sched_options full_mask(std::size_t max_picks = 4096) {
  sched_options o;
  o.max_picks = max_picks;
  return o;
}

// Runs threads to completion in phases: thread 0 until it parks at a
// read of `window_block`, then each further thread to completion in
// order, then thread 0 to completion.
class window_picker {
 public:
  explicit window_picker(block_id window_block, int n_threads)
      : block_(window_block), n_(n_threads) {}

  int operator()(const std::vector<thread_status>& sts) {
    if (phase_ == 0) {
      const auto& r = sts[0];
      if (r.runnable && r.at.kind == yield_kind::pre_cell_access &&
          r.at.access == access_kind::read && r.at.addr.block == block_) {
        phase_ = 1;
      } else {
        return 0;
      }
    }
    while (phase_ >= 1 && phase_ < n_) {
      if (!sts[static_cast<std::size_t>(phase_)].done) return phase_;
      ++phase_;
    }
    return 0;
  }

 private:
  block_id block_;
  int n_;
  int phase_ = 0;
};

struct window_fixture {
  std::shared_ptr<engine_bundle> bundle;
  cell_addr shared_ptr_cell{};  // holds ref(block) until privatized
  block_id block{};             // the reclaimed block
  cell_addr dummy{};            // an unrelated always-live cell
};

inline window_fixture make_window_fixture(const engine_config& cfg) {
  window_fixture f;
  f.bundle = std::make_shared<engine_bundle>(cfg);
  heap& h = f.bundle->get_heap();
  const block_id holder = h.alloc(2);
  f.shared_ptr_cell = cell_addr{holder, 0};
  f.dummy = cell_addr{holder, 1};
  f.block = h.alloc(2);
  h.write_cell(cell_addr{f.block, 0}, word::scalar(42));
  h.write_cell(f.shared_ptr_cell, word::ref(cell_addr{f.block, 0}));
  return f;
}

inline void init_events_for(program& prog, const window_fixture& f) {
  prog.init_values.emplace_back(f.shared_ptr_cell, word::ref(cell_addr{f.block, 0}));
  prog.init_values.emplace_back(cell_addr{f.block, 0}, word::scalar(42));
  prog.init_values.emplace_back(f.dummy, word::nil());
}

// Reader that follows the privatization discipline: test the pointer
// against NIL before dereferencing it. Thread registration is the
// caller's job (all participants register before the schedule starts,
// like a fixed thread pool).
inline std::function<void(thread_ctx&)> pointer_reader(window_fixture f,
                                                       tx_outcome* out = nullptr,
                                                       word* seen = nullptr) {
  return [f, out, seen](thread_ctx& ctx) {
    const tx_outcome o = f.bundle->get_engine().run(ctx, [&](txn& t) {
      const word p = t.read(f.shared_ptr_cell);
      if (seen) *seen = p;
      if (!p.is_nil()) t.read(p.as_ref());
    });
    if (out) *out = o;
  };
}

inline void register_fixed_threads(engine_bundle& bundle, int n) {
  if (auto* s = bundle.strategy())
    for (int tid = 0; tid < n; ++tid) s->register_thread(tid);
}

inline void quiesce_fixed_threads(engine_bundle& bundle, int n) {
  if (auto* s = bundle.strategy()) {
    for (int tid = 0; tid < n; ++tid) s->deregister_thread(tid);
    s->drain_all();
  }
}

struct flagship_result {
  history hist;
  trap_stats traps{};
  tx_outcome reader{};
  word reader_saw_final{};
  std::uint64_t rule_violations = 0;
  std::uint64_t defers = 0;          // entries that went through limbo
  std::uint64_t deferred_final = 0;  // bytes still parked at run end
  schedule recorded;
};

// The doomed-transaction window: a reader paused between its last
// validation and the dereference while another transaction privatizes the
// pointer, commits and frees the block; a helper transaction then runs an
// empty barrier before the reader resumes.
inline flagship_result run_flagship(const engine_config& cfg) {
  window_fixture f = make_window_fixture(cfg);
  flagship_result r;

  program prog;
  init_events_for(prog, f);
  prog.threads.push_back(pointer_reader(f, &r.reader, &r.reader_saw_final));
  prog.threads.push_back([f](thread_ctx& ctx) {  // privatize, commit, free
    f.bundle->get_engine().run(ctx, [&](txn& t) {
      const word p = t.read(f.shared_ptr_cell);
      t.write(f.shared_ptr_cell, word::nil());
      t.free_block(p.as_ref().block);
    });
  });
  prog.threads.push_back([f](thread_ctx& ctx) {  // transaction-aware barrier
    quiescence_barrier(f.bundle->get_engine(), ctx);
  });

  register_fixed_threads(*f.bundle, 3);
  window_picker pick{f.block, 3};
  r.hist = run_controlled(prog, std::ref(pick), full_mask());
  r.recorded = schedule::from_picks(r.hist.picks);
  r.traps = f.bundle->strategy()->traps();
  if (auto* ep = f.bundle->epoch()) {
    r.rule_violations = ep->rule_violations();
    r.defers = ep->defer_count();
  }
  quiesce_fixed_threads(*f.bundle, 3);
  if (auto* ep = f.bundle->epoch()) r.deferred_final = ep->deferred_bytes();
  return r;
}

// Replays a recorded flagship schedule; histories must come out
// byte-identical.
inline history replay_flagship(const engine_config& cfg, const schedule& sc) {
  window_fixture f = make_window_fixture(cfg);
  program prog;
  init_events_for(prog, f);
  prog.threads.push_back(pointer_reader(f));
  prog.threads.push_back([f](thread_ctx& ctx) {
    f.bundle->get_engine().run(ctx, [&](txn& t) {
      const word p = t.read(f.shared_ptr_cell);
      t.write(f.shared_ptr_cell, word::nil());
      t.free_block(p.as_ref().block);
    });
  });
  prog.threads.push_back([f](thread_ctx& ctx) {
    quiescence_barrier(f.bundle->get_engine(), ctx);
  });
  register_fixed_threads(*f.bundle, 3);
  history h = run_schedule(prog, sc, full_mask());
  quiesce_fixed_threads(*f.bundle, 3);
  return h;
}

struct case_result {
  trap_stats traps{};
  tx_outcome reader{};
  history hist;
};

// Case 2: privatize inside a transaction, free afterwards outside any
// transaction (no barrier). Case 3: privatize and free both outside.
// Under the epoch strategy the non-transactional free bypasses limbo; the
// trap strategy covers both via its guarded free.
inline case_result run_uncovered_free(const engine_config& cfg, bool tx_privatize,
                                      const schedule* replay = nullptr) {
  window_fixture f = make_window_fixture(cfg);
  case_result r;

  program prog;
  init_events_for(prog, f);
  prog.threads.push_back(pointer_reader(f, &r.reader));
  prog.threads.push_back([f, tx_privatize](thread_ctx& ctx) {
    auto& strat = *f.bundle->strategy();
    if (tx_privatize) {
      f.bundle->get_engine().run(
          ctx, [&](txn& t) { t.write(f.shared_ptr_cell, word::nil()); });
    } else {
      f.bundle->get_heap().write_cell(f.shared_ptr_cell, word::nil());
    }
    strat.nontx_free(ctx, f.block);
  });

  register_fixed_threads(*f.bundle, 2);
  if (replay) {
    r.hist = run_schedule(prog, *replay, full_mask());
  } else {
    window_picker pick{f.block, 2};
    r.hist = run_controlled(prog, std::ref(pick), full_mask());
  }
  r.traps = f.bundle->strategy()->traps();
  quiesce_fixed_threads(*f.bundle, 2);
  return r;
}

// Random-schedule sweep of the same program; returns summed trap stats.
inline trap_stats sweep_uncovered_free(const engine_config& cfg, bool tx_privatize,
                                       std::uint64_t seeds, std::uint64_t base_seed = 0) {
  trap_stats total;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    window_fixture f = make_window_fixture(cfg);
    program prog;
    prog.threads.push_back(pointer_reader(f));
    prog.threads.push_back([f, tx_privatize](thread_ctx& ctx) {
      auto& strat = *f.bundle->strategy();
      if (tx_privatize) {
        f.bundle->get_engine().run(
            ctx, [&](txn& t) { t.write(f.shared_ptr_cell, word::nil()); });
      } else {
        f.bundle->get_heap().write_cell(f.shared_ptr_cell, word::nil());
      }
      strat.nontx_free(ctx, f.block);
    });
    register_fixed_threads(*f.bundle, 2);
    run_schedule(prog, schedule::from_seed(base_seed + s), full_mask());
    const trap_stats st = f.bundle->strategy()->traps();
    quiesce_fixed_threads(*f.bundle, 2);
    total.traps_total += st.traps_total;
    total.traps_recovered += st.traps_recovered;
    total.traps_escalated += st.traps_escalated;
  }
  return total;
}

// Factory for the 2-producer/1-consumer queue micro-program used by the
// exhaustive opacity sweep.
inline std::function<program()> queue_micro_factory(engine_config cfg) {
  return [cfg]() {
    auto bundle = std::make_shared<engine_bundle>(cfg);
    const tx_queue q = tx_queue::create(bundle->get_heap(), 1, 0);
    program prog;
    prog.init_values.emplace_back(q.head, word::nil());
    prog.init_values.emplace_back(q.tail, word::nil());
    for (int p = 0; p < 2; ++p) {
      prog.threads.push_back([bundle, q, p](thread_ctx& ctx) {
        if (auto* s = bundle->strategy()) s->register_thread(ctx.tid);
        bundle->get_engine().run(
            ctx, [&](txn& t) { q.push(t, static_cast<std::uint64_t>(p) + 1); });
        if (auto* s = bundle->strategy()) s->deregister_thread(ctx.tid);
      });
    }
    prog.threads.push_back([bundle, q](thread_ctx& ctx) {
      if (auto* s = bundle->strategy()) s->register_thread(ctx.tid);
      for (int i = 0; i < 2; ++i)
        bundle->get_engine().run(ctx, [&](txn& t) { (void)q.pop(t); });
      if (auto* s = bundle->strategy()) s->deregister_thread(ctx.tid);
    });
    return prog;
  };
}

// Two transactions incrementing one shared counter.
inline std::function<program()> counter_micro_factory(engine_config cfg) {
  return [cfg]() {
    auto bundle = std::make_shared<engine_bundle>(cfg);
    heap& h = bundle->get_heap();
    const block_id b = h.alloc(1);
    const cell_addr x{b, 0};
    program prog;
    prog.init_values.emplace_back(x, word::nil());
    for (int i = 0; i < 2; ++i) {
      prog.threads.push_back([bundle, x](thread_ctx& ctx) {
        if (auto* s = bundle->strategy()) s->register_thread(ctx.tid);
        bundle->get_engine().run(ctx, [&](txn& t) {
          const word v = t.read(x);
          t.write(x, word::scalar(v.as_scalar() + 1));
        });
        if (auto* s = bundle->strategy()) s->deregister_thread(ctx.tid);
      });
    }
    return prog;
  };
}

}  // namespace tmlab::regress
