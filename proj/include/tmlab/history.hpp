#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "tmlab/types.hpp"

namespace tmlab {

enum class event_kind : std::uint8_t {
  init_write,     // setup-phase raw write; defines the initial state
  tx_begin,       // snapshot established
  tx_read,        // transactional read returning a value
  tx_write,       // buffered write (applied iff the attempt commits)
  tx_alloc,       // immediate allocation, logged for rollback
  tx_free_logged, // deferred free request
  tx_commit,      // attempt committed (value = commit clock, 0 for read-only)
  tx_abort,       // attempt rolled back
  free_executed,  // heap free actually performed
  free_deferred,  // free parked in limbo
  trap,           // access violation on a cell access
  trap_decision,  // value: 0 = rollback-retry, 1 = escalate
  escalation,     // application error surfaced
};

inline const char* to_string(event_kind k) {
  switch (k) {
    case event_kind::init_write: return "init";
    case event_kind::tx_begin: return "begin";
    case event_kind::tx_read: return "read";
    case event_kind::tx_write: return "write";
    case event_kind::tx_alloc: return "alloc";
    case event_kind::tx_free_logged: return "free-log";
    case event_kind::tx_commit: return "commit";
    case event_kind::tx_abort: return "abort";
    case event_kind::free_executed: return "free";
    case event_kind::free_deferred: return "defer";
    case event_kind::trap: return "trap";
    case event_kind::trap_decision: return "decision";
    case event_kind::escalation: return "escalate";
  }
  return "?";
}

struct event {
  std::uint64_t step = 0;     // scheduler pick index (0 in free mode)
  std::uint64_t seq = 0;      // global append order
  int thread = -1;
  std::uint64_t attempt = 0;  // per-thread transaction attempt number
  event_kind kind{};
  cell_addr addr{};
  word value{};
};

// Append-only totally ordered event log of one execution.
struct history {
  std::vector<event> events;
  std::vector<int> picks;  // scheduled mode: thread chosen at each step

  void append(event e) {
    e.seq = events.size();
    events.push_back(e);
  }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& e : events) {
      os << e.seq << ' ' << e.step << ' ' << e.thread << ' ' << e.attempt
         << ' ' << to_string(e.kind) << ' ' << e.addr.block.id << ':'
         << e.addr.offset << ' ' << e.value.raw() << '\n';
    }
    return os.str();
  }
};

}  // namespace tmlab
