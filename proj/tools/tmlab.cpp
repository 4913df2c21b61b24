// Command-line front end: run queue benchmarks with the repetition
// protocol, run the scheduled regression suite, or dump one run's memory
// trace, all as CSV.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmlab/csv.hpp"
#include "tmlab/opacity.hpp"
#include "tmlab/regressions.hpp"
#include "tmlab/stats.hpp"
#include "tmlab/tmlab.hpp"

namespace {

struct cli_config {
  std::string engine = "norec";
  std::string strategy;
  int threads = 0;
  int producers = 0;
  int consumers = 0;
  std::uint64_t messages = 1000;  // per producer
  std::uint32_t payload_cells = 8;
  std::uint32_t capacity = 64;
  std::uint64_t seed = 0;
  std::size_t reps_min = 5;
  std::size_t reps_max = 20;
  double ci = 0.05;
  std::string out;
  std::string trace_out;
  std::string replay;
  std::string from;
  bool stall_one_thread = false;
};

tmlab::engine_config make_engine_config(const cli_config& c) {
  tmlab::engine_config ec;
  ec.engine = c.engine;
  if (c.engine == "cgl") {
    if (!c.strategy.empty())
      throw tmlab::config_error("--strategy is only valid with --engine norec");
  } else {
    ec.strategy = c.strategy.empty() ? "epoch" : c.strategy;
  }
  if (const char* ceiling = std::getenv("TMLAB_TRAP_CEILING"))
    ec.trap.trap_ceiling = std::strtoull(ceiling, nullptr, 10);
  return ec;
}

tmlab::queue_workload_config make_workload_config(const cli_config& c) {
  tmlab::queue_workload_config w;
  if (c.producers > 0 || c.consumers > 0) {
    w.producers = c.producers > 0 ? c.producers : 1;
    w.consumers = c.consumers > 0 ? c.consumers : 1;
  } else if (c.threads > 0) {
    w.producers = std::max(1, c.threads / 2);
    w.consumers = std::max(1, c.threads - w.producers);
  }
  w.messages_per_producer = c.messages;
  w.payload_cells = c.payload_cells;
  w.queue_capacity = c.capacity;
  w.seed = c.seed;
  w.stall_one_thread = c.stall_one_thread;
  return w;
}

std::ostream& open_or_stdout(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open output file " + path);
  return file;
}

int cmd_bench(const cli_config& c) {
  const tmlab::engine_config ec = make_engine_config(c);
  const tmlab::queue_workload_config wc = make_workload_config(c);

  tmlab::repeat_options ropt;
  ropt.rel_width = c.ci;
  ropt.min_reps = c.reps_min;
  ropt.max_reps = c.reps_max;

  auto result = tmlab::repeat_until_confident(
      [&] { return tmlab::run_queue_workload(ec, wc); },
      [](const tmlab::run_summary& s) { return s.exec_ms; },
      [](const tmlab::run_summary& s) { return s.m_bar; }, ropt);

  // One aggregated row: means over repetitions, counter totals from the
  // last run (each run uses a fresh engine).
  tmlab::run_summary agg = result.runs.back();
  agg.exec_ms = result.exec_ci.n ? result.exec_ci.mean : agg.exec_ms;
  agg.m_bar = result.mbar_ci.n ? result.mbar_ci.mean : agg.m_bar;
  std::uint64_t m_max = 0;
  for (const auto& r : result.runs) m_max = std::max(m_max, r.m_max);
  agg.m_max = m_max;

  std::ofstream file;
  std::ostream& out = open_or_stdout(file, c.out);
  tmlab::write_summary_csv(out, {agg});

  if (!c.trace_out.empty()) {
    std::ofstream tf(c.trace_out);
    if (!tf) throw std::runtime_error("cannot open trace file " + c.trace_out);
    tmlab::write_trace_csv(tf, result.runs.back().trace);
  }

  std::cerr << "reps=" << result.reps << " converged=" << (result.converged ? "yes" : "no")
            << " exec_ms mean=" << result.exec_ci.mean << " ci_width=" << result.exec_ci.width
            << " m_bar mean=" << result.mbar_ci.mean << " ci_width=" << result.mbar_ci.width
            << "\n";
  return result.converged ? 0 : 2;
}

struct check_report {
  std::string name;
  bool pass = false;
  std::string detail;
};

int cmd_check(const cli_config& c) {
  namespace rg = tmlab::regress;
  std::vector<check_report> reports;
  tmlab::schedule failing;
  bool any_fail = false;

  auto add = [&](const std::string& name, bool pass, const std::string& detail,
                 const tmlab::schedule* sc = nullptr) {
    reports.push_back({name, pass, detail});
    if (!pass) {
      any_fail = true;
      if (sc) failing = *sc;
    }
  };

  tmlab::engine_config epoch_cfg;
  epoch_cfg.strategy = "epoch";
  tmlab::engine_config trap_cfg;
  trap_cfg.strategy = "trap";
  if (const char* ceiling = std::getenv("TMLAB_TRAP_CEILING"))
    trap_cfg.trap.trap_ceiling = std::strtoull(ceiling, nullptr, 10);

  if (!c.replay.empty()) {
    std::ifstream in(c.replay);
    if (!in) {
      std::cerr << "cannot open replay file " << c.replay << "\n";
      return 1;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const tmlab::schedule sc = tmlab::schedule::parse(ss.str());
    const tmlab::history h = rg::replay_flagship(trap_cfg, sc);
    std::cout << h.serialize();
    return 0;
  }

  {  // flagship window schedule
    const auto ep = rg::run_flagship(epoch_cfg);
    add("window-epoch-no-trap",
        ep.traps.traps_total == 0 && ep.reader.committed() && ep.rule_violations == 0,
        "traps=" + std::to_string(ep.traps.traps_total), &ep.recorded);
    const auto tr = rg::run_flagship(trap_cfg);
    add("window-trap-recovers",
        tr.traps.traps_total == 1 && tr.traps.traps_recovered == 1 &&
            tr.reader.committed() && tr.reader_saw_final.is_nil(),
        "traps=" + std::to_string(tr.traps.traps_total) +
            " recovered=" + std::to_string(tr.traps.traps_recovered),
        &tr.recorded);
  }

  {  // the premature-collection mutation must break the flagship
    tmlab::engine_config mut = epoch_cfg;
    mut.epoch.min_age = 1;
    const auto m = rg::run_flagship(mut);
    add("window-one-epoch-mutation-detected",
        m.traps.traps_total > 0 && m.rule_violations > 0,
        "traps=" + std::to_string(m.traps.traps_total) +
            " violations=" + std::to_string(m.rule_violations));
  }

  {  // uncovered non-transactional free vs guarded free
    const auto ep = rg::run_uncovered_free(epoch_cfg, true);
    add("case2-epoch-escalates", ep.traps.traps_escalated >= 1,
        "escalated=" + std::to_string(ep.traps.traps_escalated));
    const auto tr = rg::run_uncovered_free(trap_cfg, true);
    add("case2-trap-recovers", tr.traps.traps_escalated == 0 && tr.reader.committed(),
        "escalated=" + std::to_string(tr.traps.traps_escalated));
  }

  for (const char* engine : {"epoch", "trap", "cgl"}) {  // opacity sweep
    tmlab::engine_config cfg;
    if (std::string(engine) == "cgl") {
      cfg.engine = "cgl";
      cfg.strategy.clear();
    } else {
      cfg.strategy = engine;
    }
    std::uint64_t failures = 0;
    const std::uint64_t n = tmlab::enumerate_schedules(
        rg::counter_micro_factory(cfg), rg::coarse_mask(),
        [&](const tmlab::history& h) {
          if (!tmlab::check_opacity(h).ok) ++failures;
        });
    add(std::string("opacity-counter-") + (cfg.engine == "cgl" ? "cgl" : cfg.strategy),
        failures == 0, std::to_string(n) + " interleavings, " +
                           std::to_string(failures) + " opacity failures");
  }

  for (const auto& r : reports)
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail << ")\n";

  if (!c.out.empty()) {
    std::ofstream out(c.out + (any_fail ? ".failing_schedule" : ".check_results.csv"));
    if (any_fail) {
      out << failing.serialize();
      std::cerr << "failing schedule written for replay\n";
    } else {
      out << "check,result\n";
      for (const auto& r : reports) out << r.name << ',' << (r.pass ? "pass" : "fail") << '\n';
    }
  }
  return any_fail ? 1 : 0;
}

int cmd_trace(const cli_config& c) {
  tmlab::metrics_trace trace;
  tmlab::run_summary summary;
  if (!c.from.empty()) {
    std::ifstream in(c.from);
    if (!in) {
      std::cerr << "missing trace: cannot open " << c.from << "\n";
      return 1;
    }
    trace = tmlab::read_trace_csv(in);
    if (trace.samples.empty()) {
      std::cerr << "missing trace: no samples in " << c.from << "\n";
      return 1;
    }
    summary.engine_id = c.engine + (c.strategy.empty() ? "" : "-" + c.strategy);
    summary.trace = trace;
  } else {
    const tmlab::engine_config ec = make_engine_config(c);
    const tmlab::queue_workload_config wc = make_workload_config(c);
    summary = tmlab::run_queue_workload(ec, wc);
    trace = summary.trace;
  }
  summary.m_max = trace.m_max();
  summary.m_bar = tmlab::compute_mbar(trace);

  const std::string base = c.out.empty() ? "tmlab_trace" : c.out;
  {
    std::ofstream sf(base + ".samples.csv");
    if (!sf) throw std::runtime_error("cannot open " + base + ".samples.csv");
    tmlab::write_trace_csv(sf, trace);
  }
  {
    std::ofstream cf(base + ".summary.csv");
    if (!cf) throw std::runtime_error("cannot open " + base + ".summary.csv");
    tmlab::write_summary_csv(cf, {summary});
  }
  std::cerr << "wrote " << base << ".samples.csv and " << base << ".summary.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transactional-memory laboratory"};
  app.require_subcommand(1);
  cli_config c;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--engine", c.engine, "engine: norec | cgl")
        ->check(CLI::IsMember({"norec", "cgl"}));
    cmd->add_option("--strategy", c.strategy, "reclamation strategy (norec only): epoch | trap")
        ->check(CLI::IsMember({"epoch", "trap"}));
    cmd->add_option("--threads", c.threads, "worker threads (split between producers/consumers)");
    cmd->add_option("--producers", c.producers, "producer threads");
    cmd->add_option("--consumers", c.consumers, "consumer threads");
    cmd->add_option("--messages", c.messages, "messages per producer");
    cmd->add_option("--payload-cells", c.payload_cells, "payload cells per message");
    cmd->add_option("--capacity", c.capacity, "queue capacity (0 = unbounded)");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--out", c.out, "output path");
  };

  CLI::App* bench = app.add_subcommand("bench", "run the queue benchmark with repetitions");
  add_common(bench);
  bench->add_option("--reps-min", c.reps_min, "minimum repetitions");
  bench->add_option("--reps-max", c.reps_max, "maximum repetitions");
  bench->add_option("--ci", c.ci, "target CI width relative to [min,max]");
  bench->add_option("--trace-out", c.trace_out, "write the last repetition's trace CSV here");
  bench->add_flag("--stall-one-thread", c.stall_one_thread,
                  "register an idle thread so epochs freeze");

  CLI::App* check = app.add_subcommand("check", "run the scheduled regression suite");
  check->add_option("--seed", c.seed, "random seed");
  check->add_option("--out", c.out, "base path for results / failing schedule");
  check->add_option("--replay", c.replay, "replay a saved schedule file");

  CLI::App* trace = app.add_subcommand("trace", "run once and emit sample + summary CSV");
  add_common(trace);
  trace->add_option("--from", c.from, "recompute the summary from a saved samples CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed()) return cmd_bench(c);
    if (check->parsed()) return cmd_check(c);
    if (trace->parsed()) return cmd_trace(c);
  } catch (const tmlab::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
