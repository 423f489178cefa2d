// Small end-to-end example: recover a rank-(2,2,2) tensor from 40% of its
// entries with each of the four solvers.

#include <cstdio>

#include "tuckeropt/tuckeropt.hpp"

using namespace tuckeropt;

int main() {
  const Dims dims{12, 12, 12};
  const SyntheticInstance inst = gen_synthetic(dims, {2, 2, 2}, 0.4, 7);
  const Objective obj = make_objective(inst.problem);
  const RankTuple r{2, 2, 2};
  const TuckerTensor x0 = initial_point(inst.problem, r, 8);

  SolverConfig cfg;
  cfg.max_iters = 200;
  std::printf("%-9s %-14s %6s %12s %12s %s\n", "solver", "termination", "iters", "f",
              "test_error", "rank");
  for (Method m : {Method::Grap, Method::Rfgrap, Method::GrapR, Method::RfgrapR}) {
    const SolveResult res = solve(m, obj, x0, r, cfg);
    const IterRecord& last = res.trace.back();
    std::printf("%-9s %-14s %6zu %12.3e %12.3e %s\n", method_name(m),
                termination_name(res.termination), res.iterations(), last.f, last.test_error,
                last.rank.to_string().c_str());
  }
  return 0;
}
