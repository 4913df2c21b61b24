#pragma once

#include <cinttypes>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tmlab/metrics.hpp"
#include "tmlab/queue_workload.hpp"

namespace tmlab {

inline constexpr const char* kSummaryHeader =
    "engine,threads,exec_ms,m_max,m_bar,commits,aborts,traps,escalations";

inline constexpr const char* kTraceHeader = "t_ns,m_bytes";

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string summary_csv_row(const run_summary& s) {
  std::ostringstream os;
  os << s.engine_id << ',' << s.threads << ',' << format_double(s.exec_ms) << ','
     << s.m_max << ',' << format_double(s.m_bar) << ',' << s.commits << ','
     << s.aborts << ',' << s.traps << ',' << s.escalations;
  return os.str();
}

inline void write_summary_csv(std::ostream& out, const std::vector<run_summary>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) out << summary_csv_row(s) << '\n';
}

inline void write_trace_csv(std::ostream& out, const metrics_trace& tr) {
  out << kTraceHeader << '\n';
  for (const auto& s : tr.samples) out << s.t_ns << ',' << s.m_bytes << '\n';
}

inline metrics_trace read_trace_csv(std::istream& in) {
  metrics_trace tr;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == kTraceHeader) continue;
    }
    metric_sample s;
    if (std::sscanf(line.c_str(), "%" SCNu64 ",%" SCNu64, &s.t_ns, &s.m_bytes) == 2)
      tr.samples.push_back(s);
  }
  if (!tr.samples.empty()) {
    tr.t_start_ns = tr.samples.front().t_ns;
    tr.t_end_ns = tr.samples.back().t_ns;
  }
  return tr;
}

}  // namespace tmlab
