#pragma once

#include <random>

#include <gtest/gtest.h>

#include "tuckeropt/tuckeropt.hpp"

namespace tt = tuckeropt;

namespace tuckeropt {
inline void PrintTo(const RankTuple& r, std::ostream* os) { *os << r.to_string(); }
}  // namespace tuckeropt

// random helpers shared by the test files; they reuse the ones the check
// suites draw from
inline tt::DenseTensor rand_dense(const tt::Dims& dims, std::mt19937_64& rng) {
  return tt::checks::detail::random_dense(dims, rng);
}
inline tt::Matrix rand_matrix(Eigen::Index m, Eigen::Index n, std::mt19937_64& rng) {
  return tt::checks::detail::random_matrix(m, n, rng);
}
inline tt::TuckerTensor rand_point(const tt::Dims& dims, const tt::RankTuple& r,
                                   std::mt19937_64& rng) {
  return tt::checks::detail::random_point(dims, r, rng);
}

inline double rel_err(const tt::DenseTensor& a, const tt::DenseTensor& b) {
  return tt::checks::detail::rel_diff(a, b);
}
inline double rel_err(const tt::Matrix& a, const tt::Matrix& b) {
  return tt::checks::detail::rel_diff(a, b);
}

// tensor with entries t(i) = 1 + i_1 + 10 i_2 + 100 i_3 ...
inline tt::DenseTensor counting_tensor(const tt::Dims& dims) {
  tt::DenseTensor x(dims);
  for (std::size_t e = 0; e < x.size(); ++e) {
    auto idx = tt::oracles::naive::multi_index(e, dims);
    double v = 1.0, w = 1.0;
    for (std::size_t i : idx) {
      v += w * static_cast<double>(i);
      w *= 10.0;
    }
    x.values()[e] = v;
  }
  return x;
}
