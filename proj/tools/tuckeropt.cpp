// tuckeropt: completion solves, scaled benchmarks, HOSVD and oracle checks.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tuckeropt/tuckeropt.hpp"

namespace fs = std::filesystem;
using namespace tuckeropt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCap = 2;

std::vector<std::size_t> parse_list(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    long long v = -1;
    try {
      v = std::stoll(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || v < 0)
      throw PreconditionError(std::string("bad ") + what + " '" + s +
                              "': expected non-negative integers separated by commas");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw PreconditionError(std::string("empty ") + what);
  return out;
}

/// "4" -> (4,...,4) of order d; "4,3,2" must have d entries.
std::vector<std::size_t> expand(const std::string& s, std::size_t d, const char* what) {
  auto v = parse_list(s, what);
  if (v.size() == 1) v.assign(d, v[0]);
  if (v.size() != d)
    throw DimensionError(std::string(what) + " '" + s + "' has " + std::to_string(v.size()) +
                         " entries, expected " + std::to_string(d));
  return v;
}

std::size_t resolve_threads(std::optional<std::size_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("TUCKEROPT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring TUCKEROPT_THREADS='" << env << "'\n";
  }
  return 1;
}

struct SolverFlags {
  double delta = 1e-2;
  bool delta_absolute = false;
  std::size_t max_iters = 300;
  double tol = 1e-8;
  std::optional<std::size_t> threads;
  std::size_t candidate_cap = 64;
  bool no_timing = false;

  void add_to(CLI::App& app) {
    app.add_option("--delta", delta, "rank-decrease threshold (relative to sigma_max(X0))")
        ->check(CLI::PositiveNumber);
    app.add_flag("--delta-absolute", delta_absolute, "treat --delta as an absolute threshold");
    app.add_option("--max-iters", max_iters, "iteration cap");
    app.add_option("--tol", tol, "stationarity tolerance")->check(CLI::NonNegativeNumber);
    app.add_option("--threads", threads, "candidate threads (env TUCKEROPT_THREADS)")
        ->check(CLI::PositiveNumber);
    app.add_option("--candidate-cap", candidate_cap, "max rank candidates per iteration")
        ->check(CLI::PositiveNumber);
    app.add_flag("--no-timing", no_timing, "write zero timings (byte-identical reruns)");
  }

  SolverConfig config() const {
    SolverConfig cfg;
    cfg.delta = delta;
    cfg.delta_absolute = delta_absolute;
    cfg.max_iters = max_iters;
    cfg.stat_tol = tol;
    cfg.candidate_cap = candidate_cap;
    cfg.threads = resolve_threads(threads);
    cfg.record_timing = !no_timing;
    cfg.validate();
    return cfg;
  }
};

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  out << s;
}

std::string trace_csv(const SolveResult& res, std::size_t d) {
  std::ostringstream s;
  write_trace_csv(s, res.trace, d);
  return s.str();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

int exit_code(Termination t) {
  switch (t) {
    case Termination::Converged: return kExitOk;
    case Termination::IterationCap: return kExitCap;
    default: return kExitError;
  }
}

// --- complete ---------------------------------------------------------------

struct CompleteArgs {
  std::string bundle, omega, gamma;
  std::string solver = "grap-r";
  std::string rank;
  std::uint64_t seed = 1;
  std::string trace, summary, save, resume;
  SolverFlags sf;
};

int cmd_complete(const CompleteArgs& a) {
  CompletionProblem problem;
  if (!a.bundle.empty()) {
    problem = io::read_bundle(a.bundle).problem;
  } else {
    SparseCooTensor omega = io::read_coo(fs::path(a.omega));
    SparseCooTensor gamma =
        a.gamma.empty() ? SparseCooTensor(omega.dims()) : io::read_coo(fs::path(a.gamma));
    problem = CompletionProblem(std::move(omega), std::move(gamma));
  }
  const std::size_t d = problem.dims.size();
  const Method method = parse_method(a.solver);
  const RankTuple r(expand(a.rank, d, "--rank"));
  validate_rank(problem.dims, r);
  const SolverConfig cfg = a.sf.config();

  TuckerTensor x0;
  if (!a.resume.empty()) {
    x0 = io::read_tucker(a.resume);
    detail::require_dims(x0.dims() == problem.dims,
                         "checkpoint dims " + dims_to_string(x0.dims()) +
                             " differ from problem dims " + dims_to_string(problem.dims));
  } else {
    x0 = initial_point(problem, r, a.seed);
  }

  const Objective obj = make_objective(problem);
  const SolveResult res = solve(method, obj, x0, r, cfg);

  if (!a.trace.empty()) write_text(a.trace, trace_csv(res, d));
  if (!a.summary.empty()) write_text(a.summary, summary_json(res, method).dump(2) + "\n");
  if (!a.save.empty()) io::write_tucker(a.save, res.x);

  const IterRecord& last = res.trace.back();
  std::cout << method_name(method) << ": " << termination_name(res.termination) << " after "
            << res.iterations() << " iterations, f = " << fmt(last.f)
            << ", stationarity = " << fmt(last.stationarity)
            << ", rank = " << last.rank.to_string();
  if (!std::isnan(last.test_error)) std::cout << ", test error = " << fmt(last.test_error);
  std::cout << "\n";
  if (res.termination != Termination::Converged &&
      res.termination != Termination::IterationCap)
    std::cerr << "error: " << res.message << "\n";
  return exit_code(res.termination);
}

// --- bench --------------------------------------------------------------------

struct BenchArgs {
  std::string suite;
  std::optional<std::size_t> n;
  std::optional<double> p;
  std::optional<std::size_t> true_rank;
  std::vector<std::size_t> ranks;
  std::vector<std::string> solvers{"grap", "rfgrap", "grap-r", "rfgrap-r"};
  std::uint64_t seed = 1;
  std::string out_dir = "bench_out";
  bool paper_scale = false;
  SolverFlags sf;
};

struct Setting {
  std::string label;
  std::size_t n;
  std::size_t r_true;
  std::size_t r;
  double p;
};

int cmd_bench(const BenchArgs& a) {
  const bool over = a.suite == "over-rank";
  std::vector<Setting> settings;
  const std::size_t n = a.n.value_or(a.paper_scale ? 400 : (over ? 30 : 40));
  if (over) {
    const std::size_t rt = a.true_rank.value_or(2);
    const double p = a.p.value_or(a.paper_scale ? 0.01 : 0.3);
    std::vector<std::size_t> rs = a.ranks;
    if (rs.empty()) rs = a.paper_scale ? std::vector<std::size_t>{3, 4, 5, 6}
                                       : std::vector<std::size_t>{3, 4};
    for (std::size_t r : rs) settings.push_back({"r" + std::to_string(r), n, rt, r, p});
  } else {
    const std::size_t rt = a.true_rank.value_or(a.paper_scale ? 6 : 4);
    std::vector<double> ps;
    if (a.p) ps = {*a.p};
    else if (a.paper_scale) ps = {0.005, 0.01, 0.05};
    else ps = {0.1};
    const std::size_t r = a.ranks.empty() ? rt : a.ranks.front();
    for (double p : ps) settings.push_back({"p" + fmt(p), n, rt, r, p});
  }

  fs::create_directories(a.out_dir);
  const SolverConfig cfg = a.sf.config();
  std::ostringstream cmp;
  cmp << "setting,solver,iter,f,stationarity,test_error,step,candidates,r1,r2,r3,"
         "sel1,sel2,sel3,time_s\n";
  nlohmann::json summaries = nlohmann::json::array();
  bool failed = false;

  std::cout << std::left << std::setw(8) << "setting" << std::setw(10) << "solver"
            << std::setw(22) << "termination" << std::setw(7) << "iters" << std::setw(14)
            << "test_error" << std::setw(12) << "rank" << "time_s\n";
  for (const Setting& s : settings) {
    const Dims dims(3, s.n);
    const SyntheticInstance inst =
        gen_synthetic(dims, RankTuple::uniform(3, s.r_true), s.p, a.seed);
    const Objective obj = make_objective(inst.problem);
    const RankTuple r = RankTuple::uniform(3, s.r);
    const TuckerTensor x0 = initial_point(inst.problem, r, a.seed + 1);
    for (const std::string& name : a.solvers) {
      const Method m = parse_method(name);
      SolveResult res;
      try {
        res = solve(m, obj, x0, r, cfg);
      } catch (const Error& e) {
        std::cerr << "error: " << s.label << " " << name << ": " << e.what() << "\n";
        failed = true;
        continue;
      }
      const std::string stem = a.suite + "_" + s.label + "_" + method_name(m);
      write_text(fs::path(a.out_dir) / (stem + ".csv"), trace_csv(res, 3));
      for (const IterRecord& t : res.trace) {
        cmp << s.label << ',' << method_name(m) << ',' << t.iter << ','
            << detail::fmt_double(t.f) << ',' << detail::fmt_double(t.stationarity) << ','
            << detail::fmt_double(t.test_error) << ',' << detail::fmt_double(t.step) << ','
            << t.candidates;
        for (std::size_t k = 0; k < 3; ++k) cmp << ',' << t.rank[k];
        for (std::size_t k = 0; k < 3; ++k) cmp << ',' << t.candidate_rank[k];
        cmp << ',' << detail::fmt_double(t.time_s) << '\n';
      }
      nlohmann::json j = summary_json(res, m);
      j["setting"] = s.label;
      j["n"] = s.n;
      j["p"] = s.p;
      j["r_true"] = s.r_true;
      j["r"] = s.r;
      j["seed"] = a.seed;
      summaries.push_back(j);
      const IterRecord& last = res.trace.back();
      std::cout << std::setw(8) << s.label << std::setw(10) << method_name(m) << std::setw(22)
                << termination_name(res.termination) << std::setw(7) << res.iterations()
                << std::setw(14) << fmt(last.test_error) << std::setw(12)
                << last.rank.to_string() << fmt(res.wall_time_s) << "\n";
      if (res.termination == Termination::LineSearchFailure ||
          res.termination == Termination::CandidateExhaustion) {
        std::cerr << "error: " << s.label << " " << name << ": " << res.message << "\n";
        failed = true;
      }
    }
  }
  write_text(fs::path(a.out_dir) / (a.suite + "_comparison.csv"), cmp.str());
  write_text(fs::path(a.out_dir) / (a.suite + "_summary.json"), summaries.dump(2) + "\n");
  return failed ? kExitError : kExitOk;
}

// --- hosvd --------------------------------------------------------------------

int cmd_hosvd(const std::string& input, const std::string& rank, const std::string& output) {
  const DenseTensor a = io::read_dense(input);
  const RankTuple r(expand(rank, a.order(), "--rank"));
  const TuckerTensor t = hosvd(a, r);
  if (!output.empty()) io::write_tucker(output, t);
  std::cout << std::setprecision(10);
  for (std::size_t k = 0; k < a.order(); ++k) {
    const Vector s = singular_values(unfold(a, k));
    std::cout << "mode " << k + 1 << " singular values:";
    for (Eigen::Index i = 0; i < s.size(); ++i) std::cout << ' ' << s(i);
    std::cout << "\n";
  }
  const double err = fro_norm(a - to_dense(t));
  const double na = fro_norm(a);
  std::cout << "rank " << t.rank().to_string() << "\n";
  std::cout << "truncation error " << err << "\n";
  std::cout << "relative error " << (na > 0.0 ? err / na : 0.0) << "\n";
  return kExitOk;
}

// --- check --------------------------------------------------------------------

int cmd_check(std::vector<std::string> suites, std::size_t restarts, std::uint64_t seed) {
  if (suites.empty()) suites = checks::suite_names();
  checks::CheckOptions opt;
  opt.restarts = restarts;
  opt.seed = seed;
  bool all = true;
  for (const std::string& s : suites) {
    for (const auto& rep : checks::run_suite(s, opt)) {
      std::cout << rep.to_json().dump() << "\n";
      all = all && rep.pass;
    }
  }
  return all ? kExitOk : kExitError;
}

// --- generate -------------------------------------------------------------------

int cmd_generate(const std::string& n, const std::string& true_rank, double p,
                 std::uint64_t seed, const std::string& out,
                 std::optional<std::size_t> test_size) {
  auto nv = parse_list(n, "--n");
  if (nv.size() == 1) nv.assign(3, nv[0]);
  const Dims dims(nv);
  const RankTuple rt(expand(true_rank, dims.size(), "--true-rank"));
  const SyntheticInstance inst = gen_synthetic(dims, rt, p, seed, test_size);
  nlohmann::json meta;
  meta["seed"] = seed;
  meta["r_true"] = rt.values();
  io::write_bundle(out, inst.problem, meta);
  io::write_tucker(fs::path(out) / "truth.ttkr", inst.truth);
  std::cout << "wrote " << out << ": |Omega| = " << inst.problem.omega.nnz()
            << ", |Gamma| = " << inst.problem.gamma.nnz() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"first-order solvers on Tucker tensor varieties"};
  app.require_subcommand(1);

  CompleteArgs ca;
  auto* complete = app.add_subcommand("complete", "solve a completion problem from files");
  auto* bundle_opt = complete->add_option("--bundle", ca.bundle, "bundle directory");
  auto* omega_opt = complete->add_option("--omega", ca.omega, "training COO file");
  complete->add_option("--gamma", ca.gamma, "test COO file")->needs(omega_opt);
  bundle_opt->excludes(omega_opt);
  complete->add_option("--solver", ca.solver, "grap | rfgrap | grap-r | rfgrap-r")
      ->check(CLI::IsMember({"grap", "rfgrap", "grap-r", "rfgrap-r"}));
  complete->add_option("--rank", ca.rank, "rank bound r1,...,rd (or a single value)")
      ->required();
  complete->add_option("--seed", ca.seed, "seed of the random starting point");
  complete->add_option("--trace", ca.trace, "trace CSV path");
  complete->add_option("--summary", ca.summary, "summary JSON path");
  complete->add_option("--save", ca.save, "write the final iterate as a checkpoint");
  complete->add_option("--resume", ca.resume, "start from a checkpoint");
  ca.sf.add_to(*complete);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "scaled synthetic benchmarks");
  bench->add_option("suite", ba.suite, "true-rank | over-rank")
      ->required()
      ->check(CLI::IsMember({"true-rank", "over-rank"}));
  bench->add_option("--n", ba.n, "mode size (cube tensors)")->check(CLI::PositiveNumber);
  bench->add_option("--p", ba.p, "sampling rate")->check(CLI::Range(0.0, 1.0));
  bench->add_option("--true-rank", ba.true_rank, "rank of the ground truth (per mode)");
  bench->add_option("--rank", ba.ranks, "solver rank(s) per mode; repeatable");
  bench->add_option("--solver", ba.solvers, "solvers to run; repeatable")
      ->check(CLI::IsMember({"grap", "rfgrap", "grap-r", "rfgrap-r"}));
  bench->add_option("--seed", ba.seed, "data seed (the start point uses seed + 1)");
  bench->add_option("--out-dir", ba.out_dir, "output directory");
  bench->add_flag("--paper-scale", ba.paper_scale, "n = 400 settings (hours, large memory)");
  ba.sf.add_to(*bench);

  std::string h_in, h_rank, h_out;
  auto* hcmd = app.add_subcommand("hosvd", "truncated HOSVD of a dense tensor file");
  hcmd->add_option("--input", h_in, "dense tensor file (TDNS1)")->required();
  hcmd->add_option("--rank", h_rank, "target rank")->required();
  hcmd->add_option("--output", h_out, "Tucker checkpoint to write");

  std::vector<std::string> c_suites;
  std::size_t c_restarts = 200;
  std::uint64_t c_seed = checks::CheckOptions{}.seed;
  auto* ccmd = app.add_subcommand("check", "run the oracle property suites");
  ccmd->add_option("--suite", c_suites, "suite to run; repeatable")
      ->check(CLI::IsMember(checks::suite_names()));
  ccmd->add_option("--restarts", c_restarts, "restarts of the cone projection oracle")
      ->check(CLI::PositiveNumber);
  ccmd->add_option("--seed", c_seed, "base seed");

  std::string g_n = "30", g_rank = "2", g_out;
  double g_p = 0.3;
  std::uint64_t g_seed = 1;
  std::optional<std::size_t> g_test;
  auto* gcmd = app.add_subcommand("generate", "write a synthetic completion bundle");
  gcmd->add_option("--n", g_n, "dims n1,n2,n3 or a single size");
  gcmd->add_option("--true-rank", g_rank, "rank of the ground truth");
  gcmd->add_option("--p", g_p, "sampling rate")->check(CLI::Range(0.0, 1.0));
  gcmd->add_option("--seed", g_seed, "seed");
  gcmd->add_option("--test-size", g_test, "size of the test set (default |Omega|)");
  gcmd->add_option("--out", g_out, "bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*complete) {
      if (ca.bundle.empty() && ca.omega.empty())
        throw PreconditionError("complete needs --bundle or --omega");
      return cmd_complete(ca);
    }
    if (*bench) return cmd_bench(ba);
    if (*hcmd) return cmd_hosvd(h_in, h_rank, h_out);
    if (*ccmd) return cmd_check(c_suites, c_restarts, c_seed);
    if (*gcmd) return cmd_generate(g_n, g_rank, g_p, g_seed, g_out, g_test);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
