#pragma once

// File formats:
//   dense tensor   "TDNS1", u32 d, u32 dims[d], f64 values (mode-1 fastest)
//   sparse COO     text; "d n_1 ... n_d" then "i_1 ... i_d value" per line,
//                  1-based, sorted
//   Tucker         "TTKR1", u32 d, u32 dims[d], u32 core dims[d], f64 core,
//                  f64 factors (column-major, mode order)
//   bundle         directory with omega.coo, gamma.coo, meta.json
// All binary numbers are little-endian.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tuckeropt/completion.hpp"
#include "tuckeropt/error.hpp"
#include "tuckeropt/tensor.hpp"
#include "tuckeropt/tucker.hpp"

namespace tuckeropt::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& p, bool binary) {
  std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open '" + p.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary) {
  std::ofstream out(p, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  return out;
}

inline void put_u32(std::ostream& o, std::size_t v) {
  if (v > 0xffffffffULL) throw FormatError("value too large for u32 field");
  const auto x = static_cast<std::uint32_t>(v);
  o.write(reinterpret_cast<const char*>(&x), sizeof x);
}

inline std::uint32_t get_u32(std::istream& in, const std::filesystem::path& p) {
  std::uint32_t x = 0;
  if (!in.read(reinterpret_cast<char*>(&x), sizeof x))
    throw FormatError("'" + p.string() + "': truncated header");
  return x;
}

inline void put_f64(std::ostream& o, const double* v, std::size_t n) {
  o.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void get_f64(std::istream& in, double* v, std::size_t n, const std::filesystem::path& p) {
  if (n == 0) return;
  if (!in.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * sizeof(double))))
    throw FormatError("'" + p.string() + "': truncated data, expected " + std::to_string(n) +
                      " values");
}

inline void check_magic(std::istream& in, const char* magic, const std::filesystem::path& p) {
  char buf[5] = {};
  if (!in.read(buf, 5) || std::string(buf, 5) != magic)
    throw FormatError("'" + p.string() + "': bad magic, expected " + magic);
}

inline void expect_eof(std::istream& in, const std::filesystem::path& p) {
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("'" + p.string() + "': trailing bytes after data");
}

inline Dims get_dims(std::istream& in, std::size_t d, const std::filesystem::path& p) {
  Dims dims(d);
  for (auto& n : dims) n = get_u32(in, p);
  return dims;
}

}  // namespace detail

// --- dense ---------------------------------------------------------------

inline void write_dense(const std::filesystem::path& p, const DenseTensor& x) {
  auto out = detail::open_out(p, true);
  out.write("TDNS1", 5);
  detail::put_u32(out, x.order());
  for (std::size_t n : x.dims()) detail::put_u32(out, n);
  detail::put_f64(out, x.data(), x.size());
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

inline DenseTensor read_dense(const std::filesystem::path& p) {
  auto in = detail::open_in(p, true);
  detail::check_magic(in, "TDNS1", p);
  const std::uint32_t d = detail::get_u32(in, p);
  if (d == 0 || d > 64) throw FormatError("'" + p.string() + "': implausible order " + std::to_string(d));
  DenseTensor x(detail::get_dims(in, d, p));
  detail::get_f64(in, x.data(), x.size(), p);
  detail::expect_eof(in, p);
  return x;
}

// --- sparse COO ------------------------------------------------------------

inline void write_coo(std::ostream& out, const SparseCooTensor& s) {
  out << s.order();
  for (std::size_t n : s.dims()) out << ' ' << n;
  out << '\n';
  char buf[64];
  for (std::size_t e = 0; e < s.nnz(); ++e) {
    for (std::size_t i : s.index(e)) out << i + 1 << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", s.values()[e]);
    out << buf << '\n';
  }
}

inline void write_coo(const std::filesystem::path& p, const SparseCooTensor& s) {
  auto out = detail::open_out(p, false);
  write_coo(out, s);
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

inline SparseCooTensor read_coo(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw FormatError("'" + name + "' line " + std::to_string(lineno) + ": " + what);
  };
  Dims dims;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::size_t d = 0;
    if (!(ls >> d) || d == 0) fail("expected header 'd n_1 ... n_d'");
    dims.resize(d);
    for (auto& n : dims)
      if (!(ls >> n) || n == 0) fail("bad dimension in header");
    std::string extra;
    if (ls >> extra) fail("unexpected token '" + extra + "' in header");
    break;
  }
  if (dims.empty()) throw FormatError("'" + name + "': empty file");
  const std::size_t d = dims.size();
  std::vector<std::size_t> idx;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    for (std::size_t k = 0; k < d; ++k) {
      long long i = 0;
      if (!(ls >> i)) fail("expected " + std::to_string(d) + " indices and a value");
      if (i < 1 || static_cast<std::size_t>(i) > dims[k])
        fail("index " + std::to_string(i) + " out of range 1.." + std::to_string(dims[k]) +
             " in mode " + std::to_string(k + 1));
      idx.push_back(static_cast<std::size_t>(i - 1));
    }
    double v = 0.0;
    if (!(ls >> v)) fail("missing or malformed value");
    std::string extra;
    if (ls >> extra) fail("unexpected token '" + extra + "'");
    vals.push_back(v);
  }
  try {
    return SparseCooTensor(dims, std::move(idx), std::move(vals));
  } catch (const DimensionError& e) {
    throw FormatError("'" + name + "': " + e.what());
  }
}

inline SparseCooTensor read_coo(const std::filesystem::path& p) {
  auto in = detail::open_in(p, false);
  return read_coo(in, p.string());
}

// --- Tucker checkpoint -------------------------------------------------------

inline void write_tucker(const std::filesystem::path& p, const TuckerTensor& t) {
  auto out = detail::open_out(p, true);
  out.write("TTKR1", 5);
  detail::put_u32(out, t.order());
  for (std::size_t n : t.dims()) detail::put_u32(out, n);
  for (std::size_t r : t.core().dims()) detail::put_u32(out, r);
  detail::put_f64(out, t.core().data(), t.core().size());
  for (const Matrix& u : t.factors())
    detail::put_f64(out, u.data(), static_cast<std::size_t>(u.size()));
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

inline TuckerTensor read_tucker(const std::filesystem::path& p) {
  auto in = detail::open_in(p, true);
  detail::check_magic(in, "TTKR1", p);
  const std::uint32_t d = detail::get_u32(in, p);
  if (d == 0 || d > 64) throw FormatError("'" + p.string() + "': implausible order " + std::to_string(d));
  const Dims dims = detail::get_dims(in, d, p);
  const Dims rdims = detail::get_dims(in, d, p);
  for (std::size_t k = 0; k < d; ++k)
    if (rdims[k] > dims[k])
      throw FormatError("'" + p.string() + "': core dim exceeds tensor dim in mode " +
                        std::to_string(k + 1));
  DenseTensor core(rdims);
  detail::get_f64(in, core.data(), core.size(), p);
  std::vector<Matrix> factors;
  for (std::size_t k = 0; k < d; ++k) {
    Matrix u(static_cast<Eigen::Index>(dims[k]), static_cast<Eigen::Index>(rdims[k]));
    detail::get_f64(in, u.data(), static_cast<std::size_t>(u.size()), p);
    factors.push_back(std::move(u));
  }
  detail::expect_eof(in, p);
  return TuckerTensor(dims, std::move(core), std::move(factors));
}

// --- problem bundle ----------------------------------------------------------

struct Bundle {
  CompletionProblem problem;
  nlohmann::json meta;
};

inline void write_bundle(const std::filesystem::path& dir, const CompletionProblem& p,
                         nlohmann::json meta) {
  std::filesystem::create_directories(dir);
  write_coo(dir / "omega.coo", p.omega);
  write_coo(dir / "gamma.coo", p.gamma);
  meta["dims"] = p.dims;
  if (!meta.contains("p")) meta["p"] = p.sampling_rate();
  auto out = detail::open_out(dir / "meta.json", false);
  out << meta.dump(2) << '\n';
}

inline Bundle read_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error("bundle directory '" + dir.string() + "' does not exist");
  Bundle b;
  SparseCooTensor omega = read_coo(dir / "omega.coo");
  SparseCooTensor gamma = read_coo(dir / "gamma.coo");
  b.problem = CompletionProblem(std::move(omega), std::move(gamma));
  const auto meta_path = dir / "meta.json";
  if (std::filesystem::exists(meta_path)) {
    auto in = detail::open_in(meta_path, false);
    try {
      b.meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("'" + meta_path.string() + "': " + e.what());
    }
  }
  return b;
}

}  // namespace tuckeropt::io
