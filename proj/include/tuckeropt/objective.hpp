#pragma once

#include <functional>

#include "tuckeropt/tangent.hpp"
#include "tuckeropt/tensor.hpp"
#include "tuckeropt/tucker.hpp"

namespace tuckeropt {

/// Smooth objective f on R^{n_1 x ... x n_d} evaluated at Tucker points.
/// The gradient is returned in COO form; dense gradients simply list every
/// entry.
struct Objective {
  Dims dims;
  std::function<double(const TuckerTensor&)> value;
  std::function<SparseCooTensor(const TuckerTensor&)> gradient;
  /// Optional: initial trial step along V (e.g. exact line minimizer of a
  /// quadratic). Unset means min{1, 1/||V||}.
  std::function<double(const TuckerTensor&, const TangentVector&)> initial_step;
  /// Optional: held-out error reported in traces.
  std::function<double(const TuckerTensor&)> test_error;
};

}  // namespace tuckeropt
