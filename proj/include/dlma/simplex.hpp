#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dlma {

enum class RowSense { less_equal, greater_equal, equal };

/// Sparse row `sum coef[k] * x[index[k]]  (sense)  rhs`.
struct LpRow {
  std::vector<int> index;
  std::vector<double> coef;
  RowSense sense = RowSense::less_equal;
  double rhs = 0.0;
};

struct VarBounds {
  double lo = 0.0;  // must be finite
  double hi = std::numeric_limits<double>::infinity();
};

/// minimize objective . x  subject to rows and bounds.
struct LinearProgram {
  int n_vars = 0;
  std::vector<double> objective;
  std::vector<LpRow> rows;
  std::vector<VarBounds> bounds;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };
const char* to_string(LpStatus s);

struct LpSolution {
  std::vector<double> values;
  double objective_value = 0.0;
  LpStatus status = LpStatus::iteration_limit;
  long iterations = 0;
};

enum class PricingRule {
  bland,    // smallest eligible index everywhere
  dantzig,  // most negative reduced cost; Bland's rule while stalled on a degenerate vertex
};

struct SimplexOptions {
  double tol = 1e-7;          // feasibility / optimality tolerance of the returned point
  long max_iterations = 0;    // 0 means 50 * n_vars
  PricingRule pricing = PricingRule::dantzig;
};

/// Two-phase bounded-variable primal simplex on a dense tableau. Deterministic.
/// The final basis is refactorized to polish the returned point.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

double row_activity(const LpRow& row, std::span<const double> x);
/// Largest violation of any row or bound at x (0 when feasible).
double max_violation(const LinearProgram& lp, std::span<const double> x);
double objective_value(const LinearProgram& lp, std::span<const double> x);

/// CPLEX-LP text form, readable by common third-party solvers.
void write_lp_format(const LinearProgram& lp, std::ostream& out);

}  // namespace dlma
