#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace tmlab {

struct ci_estimate {
  double mean = 0;
  double sd = 0;
  double lo = 0;
  double hi = 0;
  double width = 0;  // hi - lo
  double min = 0;
  double max = 0;
  std::size_t n = 0;
};

// Two-sided Student-t confidence interval over run means.
inline ci_estimate confidence_interval(const std::vector<double>& xs, double confidence) {
  if (xs.size() < 2) throw std::invalid_argument("confidence interval needs >= 2 samples");
  ci_estimate e;
  e.n = xs.size();
  e.min = *std::min_element(xs.begin(), xs.end());
  e.max = *std::max_element(xs.begin(), xs.end());
  double sum = 0;
  for (double x : xs) sum += x;
  e.mean = sum / static_cast<double>(e.n);
  double ss = 0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  e.sd = std::sqrt(ss / static_cast<double>(e.n - 1));
  const boost::math::students_t dist(static_cast<double>(e.n - 1));
  const double t = boost::math::quantile(dist, 0.5 + confidence / 2.0);
  const double half = t * e.sd / std::sqrt(static_cast<double>(e.n));
  e.lo = e.mean - half;
  e.hi = e.mean + half;
  e.width = 2 * half;
  return e;
}

struct repeat_options {
  double rel_width = 0.05;    // CI width vs the observed [min,max] span
  double confidence = 0.95;
  std::size_t min_reps = 5;
  std::size_t max_reps = 50;
};

template <typename Summary>
struct repeat_result {
  std::vector<Summary> runs;
  ci_estimate exec_ci{};
  ci_estimate mbar_ci{};
  bool converged = false;  // false => NonConvergence (not fatal)
  std::size_t reps = 0;
};

// Repeats runner() until the confidence interval of execution time and of
// the mean memory consumption are both narrower than rel_width of their
// observed [min,max] span, or max_reps is reached.
//
// Summary must expose exec_ms() and mbar() accessors via the two
// projection callables.
template <typename Runner, typename ExecOf, typename MbarOf>
auto repeat_until_confident(Runner&& runner, ExecOf&& exec_of, MbarOf&& mbar_of,
                            repeat_options opt = {}) {
  using summary_t = decltype(runner());
  repeat_result<summary_t> res;
  std::vector<double> execs, mbars;
  while (res.runs.size() < opt.max_reps) {
    res.runs.push_back(runner());
    execs.push_back(exec_of(res.runs.back()));
    mbars.push_back(mbar_of(res.runs.back()));
    if (res.runs.size() < opt.min_reps || res.runs.size() < 2) continue;
    res.exec_ci = confidence_interval(execs, opt.confidence);
    res.mbar_ci = confidence_interval(mbars, opt.confidence);
    const bool exec_ok = res.exec_ci.width <= opt.rel_width * (res.exec_ci.max - res.exec_ci.min);
    const bool mbar_ok = res.mbar_ci.width <= opt.rel_width * (res.mbar_ci.max - res.mbar_ci.min);
    if (exec_ok && mbar_ok) {
      res.converged = true;
      break;
    }
  }
  res.reps = res.runs.size();
  if (res.reps >= 2 && res.exec_ci.n != res.reps) {
    res.exec_ci = confidence_interval(execs, opt.confidence);
    res.mbar_ci = confidence_interval(mbars, opt.confidence);
  }
  return res;
}

}  // namespace tmlab
