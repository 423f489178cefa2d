#pragma once

// Trace CSV and summary JSON writers for solver runs.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "tuckeropt/solvers.hpp"

namespace tuckeropt {

namespace detail {
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// iter,f,stationarity,grad_norm,dir_norm,step,backtracks,r1..rd,candidates,time_s,test_error
inline void write_trace_csv(std::ostream& out, const std::vector<IterRecord>& trace,
                            std::size_t d) {
  out << "iter,f,stationarity,grad_norm,dir_norm,step,backtracks";
  for (std::size_t k = 1; k <= d; ++k) out << ",r" << k;
  out << ",candidates,time_s,test_error\n";
  using detail::fmt_double;
  for (const IterRecord& r : trace) {
    out << r.iter << ',' << fmt_double(r.f) << ',' << fmt_double(r.stationarity) << ','
        << fmt_double(r.grad_norm) << ',' << fmt_double(r.dir_norm) << ','
        << fmt_double(r.step) << ',' << r.backtracks;
    for (std::size_t k = 0; k < d; ++k) out << ',' << r.rank[k];
    out << ',' << r.candidates << ',' << fmt_double(r.time_s) << ','
        << fmt_double(r.test_error) << '\n';
  }
}

inline nlohmann::json summary_json(const SolveResult& res, Method method) {
  nlohmann::json j;
  const IterRecord& last = res.trace.back();
  j["solver"] = method_name(method);
  j["final_f"] = last.f;
  j["stationarity"] = last.stationarity;
  j["rank"] = last.rank.values();
  j["iters"] = res.iterations();
  j["wall_time_s"] = res.wall_time_s;
  j["termination"] = termination_name(res.termination);
  j["message"] = res.message;
  j["effective_delta"] = res.effective_delta;
  if (!std::isnan(last.test_error)) j["test_error"] = last.test_error;
  return j;
}

}  // namespace tuckeropt
