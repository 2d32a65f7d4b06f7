#include "hrm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hrm/errors.hpp"

namespace hrm {

namespace {

double evaluate(const ScalarFn& f, const Matrix<double>& x) {
  Tape<double> tape;
  const Var out = f(tape, tape.leaf(x, false));
  const Matrix<double>& v = tape.value(out);
  if (v.size() != 1) throw ShapeError("finite_diff_check: function is not scalar-valued");
  return v(0, 0);
}

}  // namespace

GradCheckResult finite_diff_check(const ScalarFn& f, const Matrix<double>& x, double tol,
                                  double step, double floor) {
  Tape<double> tape;
  const Var input = tape.leaf(x, true);
  const Var out = f(tape, input);
  if (tape.value(out).size() != 1) throw ShapeError("finite_diff_check: function is not scalar-valued");
  tape.backward(out);
  const Matrix<double> analytic = tape.grad(input);

  GradCheckResult result;
  Matrix<double> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe.data()[i];
    probe.data()[i] = saved + step;
    const double up = evaluate(f, probe);
    probe.data()[i] = saved - step;
    const double down = evaluate(f, probe);
    probe.data()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    if (!std::isfinite(numeric)) throw NonFiniteError("finite_diff_check: non-finite difference");
    const double a = analytic.data()[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    if (rel > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = std::max(result.max_rel_error, rel);
      result.worst_index = i;
    }
  }
  result.passed = result.max_rel_error < tol;
  return result;
}

}  // namespace hrm
