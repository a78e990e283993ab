#include "lp_oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace dlma::testing {
namespace {

struct Constraint {
  std::vector<double> a;  // dense coefficients
  double b;
  RowSense sense;
};

std::vector<Constraint> all_constraints(const LinearProgram& lp) {
  std::vector<Constraint> cs;
  for (const auto& row : lp.rows) {
    Constraint c{std::vector<double>(lp.n_vars, 0.0), row.rhs, row.sense};
    for (std::size_t k = 0; k < row.index.size(); ++k) c.a[row.index[k]] += row.coef[k];
    cs.push_back(std::move(c));
  }
  for (int j = 0; j < lp.n_vars; ++j) {
    const VarBounds b = lp.bounds.empty() ? VarBounds{} : lp.bounds[j];
    std::vector<double> e(lp.n_vars, 0.0);
    e[j] = 1.0;
    if (std::isfinite(b.lo)) cs.push_back({e, b.lo, RowSense::greater_equal});
    if (std::isfinite(b.hi)) cs.push_back({e, b.hi, RowSense::less_equal});
  }
  return cs;
}

bool satisfied(const Constraint& c, const std::vector<double>& x, double tol) {
  double act = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) act += c.a[j] * x[j];
  const double slack = tol * (1.0 + std::abs(c.b));
  switch (c.sense) {
    case RowSense::less_equal: return act <= c.b + slack;
    case RowSense::greater_equal: return act >= c.b - slack;
    case RowSense::equal: return std::abs(act - c.b) <= slack;
  }
  return false;
}

}  // namespace

std::optional<OracleOptimum> enumerate_vertices(const LinearProgram& lp, double tol) {
  const auto cs = all_constraints(lp);
  const int n = lp.n_vars;
  const int m = static_cast<int>(cs.size());
  std::optional<OracleOptimum> best;
  std::vector<int> pick(n);
  // Iterate over all n-subsets of the m constraints in lexicographic order.
  for (int i = 0; i < n; ++i) pick[i] = i;
  if (n > m) return best;
  while (true) {
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd b(n);
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < n; ++j) a(r, j) = cs[pick[r]].a[j];
      b(r) = cs[pick[r]].b;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() == n) {
      const Eigen::VectorXd sol = lu.solve(b);
      std::vector<double> x(sol.data(), sol.data() + n);
      bool ok = true;
      for (const auto& c : cs) {
        if (!satisfied(c, x, tol)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        const double obj = objective_value(lp, x);
        if (!best || obj < best->objective) best = OracleOptimum{obj, x};
      }
    }
    int k = n - 1;
    while (k >= 0 && pick[k] == m - n + k) --k;
    if (k < 0) break;
    ++pick[k];
    for (int j = k + 1; j < n; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

double laic_grid_search(const LaicProblem& problem, int levels) {
  const int n = problem.n_pixels, h = problem.height, w = problem.width, r = problem.radius;
  // Window membership, flattened.
  std::vector<int> start(n + 1, 0), members;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int yy = std::max(0, y - r); yy < std::min(h, y + r + 1); ++yy) {
        for (int xx = std::max(0, x - r); xx < std::min(w, x + r + 1); ++xx) members.push_back(yy * w + xx);
      }
      start[y * w + x + 1] = static_cast<int>(members.size());
    }
  }
  std::vector<int> code(n, 0);
  std::vector<double> x(n, 0.0), g(n, 0.0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    for (int i = 0; i < n; ++i) {
      x[i] = static_cast<double>(code[i]) / levels;
      g[i] = x[i] * problem.gain_weight[i];
    }
    bool feasible = true;
    double contrast = 0.0;
    for (int i = 0; i < n && feasible; ++i) {
      double sum = 0.0;
      for (int k = start[i]; k < start[i + 1]; ++k) sum += x[members[k]];
      const double d = x[i] - sum / (start[i + 1] - start[i]);
      const int s = problem.sign_map[i];
      feasible = s > 0 ? d >= -1e-12 : s < 0 ? d <= 1e-12 : std::abs(d) <= 1e-12;
      contrast += s * d;
    }
    if (feasible) {
      double tv = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const int i = y * w + xx;
          if (xx + 1 < w) tv += std::abs(g[i + 1] - g[i]);
          if (y + 1 < h) tv += std::abs(g[i + w] - g[i]);
        }
      }
      best = std::min(best, tv - problem.lambda2 * contrast);
    }
    int k = 0;
    while (k < n && code[k] == levels) code[k++] = 0;
    if (k == n) break;
    ++code[k];
  }
  return best;
}

}  // namespace dlma::testing
