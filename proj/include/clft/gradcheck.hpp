#pragma once

#include <iosfwd>
#include <string>

#include "clft/tensor.hpp"

namespace clft {

enum class GradcheckScope { ops, encoder, full };
GradcheckScope gradcheck_scope_from_string(const std::string& s);

struct GradcheckOptions {
  GradcheckScope scope = GradcheckScope::ops;
  double tolerance = 1e-4;
  /// Per-tensor element budget for the model-scale scopes (0 = exhaustive).
  int64_t element_budget = 2;
  uint64_t seed = 42;
  /// Test hook: perturb one analytic gradient so the suite must fail.
  bool corrupt = false;
};

/// Runs the finite-difference suites for the scope; one line per check.
/// Returns true when every check passed.
bool run_gradcheck(const GradcheckOptions& opts, std::ostream& out);

}  // namespace clft
