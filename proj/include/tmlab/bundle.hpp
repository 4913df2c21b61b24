#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "tmlab/cgl.hpp"
#include "tmlab/engine.hpp"
#include "tmlab/heap.hpp"
#include "tmlab/norec.hpp"
#include "tmlab/reclaim_epoch.hpp"
#include "tmlab/reclaim_trap.hpp"

namespace tmlab {

struct engine_config {
  std::string engine = "norec";    // "norec" | "cgl"
  std::string strategy = "epoch";  // "epoch" | "trap"; norec only
  heap_config heap{};
  epoch_options epoch{};
  trap_options trap{};
};

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One wired-up instance: heap + clock + strategy + engine.
class engine_bundle {
 public:
  explicit engine_bundle(engine_config cfg) : cfg_(std::move(cfg)), heap_(cfg_.heap) {
    if (cfg_.engine == "norec") {
      if (cfg_.strategy == "epoch") {
        strategy_ = std::make_unique<epoch_reclaim>(heap_, cfg_.epoch);
      } else if (cfg_.strategy == "trap") {
        strategy_ = std::make_unique<trap_reclaim>(heap_, clock_, cfg_.trap);
      } else {
        throw config_error("unknown strategy '" + cfg_.strategy + "'");
      }
      engine_ = std::make_unique<norec_engine>(heap_, clock_, *strategy_);
    } else if (cfg_.engine == "cgl") {
      engine_ = std::make_unique<cgl_engine>(heap_);
    } else {
      throw config_error("unknown engine '" + cfg_.engine + "'");
    }
  }

  std::string id() const {
    return cfg_.engine == "cgl" ? "cgl" : "norec-" + cfg_.strategy;
  }

  heap& get_heap() { return heap_; }
  global_clock& clock() { return clock_; }
  engine& get_engine() { return *engine_; }
  reclaim_strategy* strategy() { return strategy_.get(); }

  epoch_reclaim* epoch() { return dynamic_cast<epoch_reclaim*>(strategy_.get()); }
  trap_reclaim* trap() { return dynamic_cast<trap_reclaim*>(strategy_.get()); }

  const engine_config& config() const { return cfg_; }

 private:
  engine_config cfg_;
  heap heap_;
  global_clock clock_;
  std::unique_ptr<reclaim_strategy> strategy_;
  std::unique_ptr<engine> engine_;
};

}  // namespace tmlab
