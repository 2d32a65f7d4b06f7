#pragma once

#include <functional>

#include "hrm/tape.hpp"

namespace hrm {

/// Builds a scalar (1x1) on the tape from the input leaf it is given.
using ScalarFn = std::function<Var(Tape<double>&, Var)>;

struct GradCheckResult {
  bool passed = false;
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
};

/// Compares the tape gradient of f at x against central differences with
/// the given step. Per-entry relative error is |g - fd| / max(|g|, |fd|, floor);
/// passes iff the maximum is below tol. Throws NonFiniteError if f is not finite.
GradCheckResult finite_diff_check(const ScalarFn& f, const Matrix<double>& x, double tol,
                                  double step = 1e-5, double floor = 1e-6);

}  // namespace hrm
