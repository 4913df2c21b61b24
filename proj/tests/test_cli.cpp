#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "tmlab/csv.hpp"
#include "tmlab/metrics.hpp"
#include "tmlab/regressions.hpp"

using tmlab::engine_config;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd =
      env_prefix + std::string(TMLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string tmp_path(const std::string& name) {
  return std::string("/tmp/tmlab_test_") + std::to_string(getpid()) + "_" + name;
}

}  // namespace

TEST_CASE("bench emits the fixed summary schema") {
  const std::string out = tmp_path("bench.csv");
  const int rc = run_cli("bench --engine norec --strategy trap --threads 4 --messages 50 "
                         "--reps-min 2 --reps-max 3 --out " + out);
  CHECK((rc == 0 || rc == 2));  // 2 = NonConvergence, still a valid run
  const std::string text = slurp(out);
  CHECK(text.rfind(tmlab::kSummaryHeader, 0) == 0);
  CHECK(text.find("norec-trap,4,") != std::string::npos);
  std::remove(out.c_str());
}

TEST_CASE("strategy with cgl is a config error") {
  CHECK(run_cli("bench --engine cgl --strategy trap --messages 10") == 1);
}

TEST_CASE("trace emits samples plus a recomputable summary") {
  const std::string base = tmp_path("trace");
  REQUIRE(run_cli("trace --engine norec --strategy epoch --threads 2 --messages 40 --out " +
                  base) == 0);
  std::ifstream sf(base + ".samples.csv");
  REQUIRE(sf.good());
  std::string header;
  std::getline(sf, header);
  CHECK(header == tmlab::kTraceHeader);
  sf.seekg(0);
  const tmlab::metrics_trace tr = tmlab::read_trace_csv(sf);
  REQUIRE(tr.samples.size() >= 2);

  const std::string summary = slurp(base + ".summary.csv");
  std::istringstream ls(summary);
  std::string hdr, row;
  std::getline(ls, hdr);
  std::getline(ls, row);
  CHECK(hdr == tmlab::kSummaryHeader);

  // m_bar in the summary equals the step integral of the emitted samples.
  std::istringstream fields(row);
  std::string field;
  for (int i = 0; i <= 4; ++i) std::getline(fields, field, ',');
  const double m_bar_reported = std::strtod(field.c_str(), nullptr);
  const double m_bar_recomputed = tmlab::compute_mbar(tr);
  CHECK_THAT(m_bar_reported,
             Catch::Matchers::WithinULP(m_bar_recomputed, 1));

  std::remove((base + ".samples.csv").c_str());
  std::remove((base + ".summary.csv").c_str());
}

TEST_CASE("trace --from a missing file reports the missing trace") {
  CHECK(run_cli("trace --from /nonexistent/trace.csv") == 1);
}

TEST_CASE("trace --from recomputes a summary from saved samples") {
  const std::string src = tmp_path("saved.csv");
  {
    std::ofstream out(src);
    out << tmlab::kTraceHeader << "\n0,0\n1,100\n3,400\n4,400\n";
  }
  const std::string base = tmp_path("from");
  REQUIRE(run_cli("trace --from " + src + " --out " + base) == 0);
  const std::string summary = slurp(base + ".summary.csv");
  CHECK(summary.find(",150,") != std::string::npos);  // the hand integral
  std::remove(src.c_str());
  std::remove((base + ".samples.csv").c_str());
  std::remove((base + ".summary.csv").c_str());
}

TEST_CASE("check replays a saved schedule deterministically") {
  engine_config cfg;
  cfg.strategy = "trap";
  const auto r = tmlab::regress::run_flagship(cfg);
  const std::string file = tmp_path("sched.txt");
  {
    std::ofstream out(file);
    out << r.recorded.serialize();
  }
  const std::string h1 = tmp_path("hist1.txt");
  const std::string h2 = tmp_path("hist2.txt");
  REQUIRE(std::system((std::string(TMLAB_CLI_PATH) + " check --replay " + file + " > " + h1 +
                       " 2>/dev/null")
                          .c_str()) == 0);
  REQUIRE(std::system((std::string(TMLAB_CLI_PATH) + " check --replay " + file + " > " + h2 +
                       " 2>/dev/null")
                          .c_str()) == 0);
  const std::string a = slurp(h1);
  CHECK(a == slurp(h2));
  CHECK(a.find("trap") != std::string::npos);  // the replay reproduces the trap
  std::remove(file.c_str());
  std::remove(h1.c_str());
  std::remove(h2.c_str());
}

TEST_CASE("the trap ceiling env var is accepted") {
  const int rc = run_cli("bench --engine norec --strategy trap --messages 20 "
                         "--reps-min 2 --reps-max 2",
                         "TMLAB_TRAP_CEILING=7 ");
  CHECK((rc == 0 || rc == 2));
}

TEST_CASE("check passes on a correct build and its CSV is deterministic") {
  const std::string out1 = tmp_path("check1");
  const std::string out2 = tmp_path("check2");
  REQUIRE(run_cli("check --out " + out1) == 0);
  REQUIRE(run_cli("check --out " + out2) == 0);
  const std::string r1 = slurp(out1 + ".check_results.csv");
  const std::string r2 = slurp(out2 + ".check_results.csv");
  CHECK(r1 == r2);  // same seed + scheduled mode: identical bytes
  CHECK(r1.find("window-epoch-no-trap,pass") != std::string::npos);
  CHECK(r1.find("window-trap-recovers,pass") != std::string::npos);
  std::remove((out1 + ".check_results.csv").c_str());
  std::remove((out2 + ".check_results.csv").c_str());
}
