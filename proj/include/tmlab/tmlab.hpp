#pragma once

// Transactional-memory laboratory: a NOrec-style STM engine with
// interchangeable memory-reclamation strategies, a coarse-global-lock
// baseline, a deterministic interleaving scheduler with an opacity
// oracle, and a message-queue benchmark with memory metrics.

#include "tmlab/bundle.hpp"
#include "tmlab/cgl.hpp"
#include "tmlab/csv.hpp"
#include "tmlab/engine.hpp"
#include "tmlab/heap.hpp"
#include "tmlab/history.hpp"
#include "tmlab/instrument.hpp"
#include "tmlab/metrics.hpp"
#include "tmlab/norec.hpp"
#include "tmlab/opacity.hpp"
#include "tmlab/queue_workload.hpp"
#include "tmlab/reclaim.hpp"
#include "tmlab/reclaim_epoch.hpp"
#include "tmlab/reclaim_trap.hpp"
#include "tmlab/sched.hpp"
#include "tmlab/stats.hpp"
#include "tmlab/types.hpp"
