#pragma once

#include <cstdint>
#include <functional>

#include "tmlab/history.hpp"
#include "tmlab/types.hpp"

namespace tmlab {

// The six instrumented points. pre_cell_access sits between the last
// validation and the raw access; that window is where a concurrent
// privatize-commit-free can doom a reader.
enum class yield_kind : std::uint8_t {
  pre_validate,
  post_validate,
  pre_cell_access,
  pre_commit_hook,
  post_commit,
  trap_entry,
};

inline const char* to_string(yield_kind k) {
  switch (k) {
    case yield_kind::pre_validate: return "pre-validate";
    case yield_kind::post_validate: return "post-validate";
    case yield_kind::pre_cell_access: return "pre-cell-access";
    case yield_kind::pre_commit_hook: return "pre-commit-hook";
    case yield_kind::post_commit: return "post-commit";
    case yield_kind::trap_entry: return "trap-entry";
  }
  return "?";
}

enum class access_kind : std::uint8_t { none, read, write };

struct yield_info {
  yield_kind kind{};
  access_kind access = access_kind::none;
  cell_addr addr{};
};

// Hook surface the scheduler installs per logical thread. In free mode
// the pointer is null and every site degrades to a plain spin or no-op.
class instrument {
 public:
  virtual ~instrument() = default;
  virtual void point(const yield_info& y) = 0;
  virtual void wait_until(const std::function<bool()>& pred) = 0;
  virtual void record(event e) = 0;
};

// Per-worker-thread context. Confined to its owning thread.
struct thread_ctx {
  int tid = 0;
  instrument* instr = nullptr;
  bool in_tx = false;
  std::uint64_t attempt_counter = 0;  // transaction attempts begun on this thread
};

inline void ipoint(thread_ctx& c, yield_kind k, access_kind a = access_kind::none,
                   cell_addr addr = {}) {
  if (c.instr) c.instr->point(yield_info{k, a, addr});
}

inline void irecord(thread_ctx& c, event_kind k, cell_addr addr = {}, word v = {}) {
  if (c.instr) {
    event e;
    e.thread = c.tid;
    e.attempt = c.attempt_counter;
    e.kind = k;
    e.addr = addr;
    e.value = v;
    c.instr->record(e);
  }
}

template <typename Pred>
inline void iwait(thread_ctx& c, Pred&& pred) {
  if (c.instr) {
    c.instr->wait_until(std::function<bool()>(pred));
  } else {
    while (!pred()) {
#if defined(__x86_64__) || defined(__i386__)
      __builtin_ia32_pause();
#endif
    }
  }
}

}  // namespace tmlab
