#include "dlma/simplex.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dlma/error.hpp"

namespace dlma {

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

double row_activity(const LpRow& row, std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t k = 0; k < row.index.size(); ++k) acc += row.coef[k] * x[row.index[k]];
  return acc;
}

double max_violation(const LinearProgram& lp, std::span<const double> x) {
  double worst = 0.0;
  for (int j = 0; j < lp.n_vars; ++j) {
    worst = std::max({worst, lp.bounds[j].lo - x[j], x[j] - lp.bounds[j].hi});
  }
  for (const auto& row : lp.rows) {
    const double a = row_activity(row, x);
    switch (row.sense) {
      case RowSense::less_equal: worst = std::max(worst, a - row.rhs); break;
      case RowSense::greater_equal: worst = std::max(worst, row.rhs - a); break;
      case RowSense::equal: worst = std::max(worst, std::abs(a - row.rhs)); break;
    }
  }
  return worst;
}

double objective_value(const LinearProgram& lp, std::span<const double> x) {
  double acc = 0.0;
  for (int j = 0; j < lp.n_vars; ++j) acc += lp.objective[j] * x[j];
  return acc;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kHarrisTol = 1e-9;  // bound relaxation in the first ratio pass
constexpr double kCostTol = 1e-10;
constexpr int kRefreshInterval = 200;  // iterations between basic-value recomputation
constexpr int kStallLimit = 20;        // degenerate pivots before Bland's rule takes over
constexpr double kPerturbation = 1e-9; // relative relaxation of inequality rows

// Working form: y = x - lo in [0, upper]; every row an equality with slack
// or artificial columns appended after the structural ones.
class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SimplexOptions& options) : lp_(lp), options_(options) {
    validate();
    build();
  }

  LpSolution run() {
    LpSolution sol;
    const long cap = options_.max_iterations > 0 ? options_.max_iterations : 50L * std::max(1, lp_.n_vars);

    if (n_art_ > 0 && artificial_sum() > 0.0) {
      set_phase_costs(/*phase_one=*/true);
      const LpStatus s = iterate(cap);
      if (s == LpStatus::iteration_limit) return finish(sol, s);
      if (artificial_sum() > options_.tol) return finish(sol, LpStatus::infeasible);
    }
    for (int j = first_art_; j < ncols_; ++j) upper_[j] = 0.0;  // retire artificials
    set_phase_costs(/*phase_one=*/false);
    LpStatus s = iterate(cap);
    if (s == LpStatus::optimal) {
      restore_exact_rhs();
      s = dual_cleanup(cap);
    }
    return finish(sol, s);
  }

 private:
  void validate() const {
    if (lp_.n_vars < 0 || static_cast<int>(lp_.objective.size()) != lp_.n_vars ||
        static_cast<int>(lp_.bounds.size()) != lp_.n_vars) {
      throw Error(ErrorCode::invalid_argument, "linear program sizes are inconsistent");
    }
    for (const auto& b : lp_.bounds) {
      if (!std::isfinite(b.lo) || b.hi < b.lo) throw Error(ErrorCode::invalid_argument, "invalid variable bounds");
    }
    for (const auto& row : lp_.rows) {
      if (row.index.size() != row.coef.size()) throw Error(ErrorCode::invalid_argument, "malformed LP row");
      for (int j : row.index) {
        if (j < 0 || j >= lp_.n_vars) throw Error(ErrorCode::invalid_argument, "LP row references unknown variable");
      }
    }
  }

  void build() {
    n_ = lp_.n_vars;
    m_ = static_cast<int>(lp_.rows.size());
    // column layout: [structural | slacks | artificials]
    std::vector<int> slack_of(m_, -1);
    int n_slack = 0;
    for (int r = 0; r < m_; ++r) {
      if (lp_.rows[r].sense != RowSense::equal) slack_of[r] = n_ + n_slack++;
    }
    // Inequalities are relaxed by a tiny row-specific amount so that no vertex
    // is degenerate; the exact right-hand side is restored after phase 2.
    std::mt19937_64 perturb_rng(0x5eed);
    std::uniform_real_distribution<double> perturb(1.0, 2.0);
    rhs_.assign(m_, 0.0);
    rhs_exact_.assign(m_, 0.0);
    row_sign_.assign(m_, 1.0);
    std::vector<bool> needs_art(m_, false);
    for (int r = 0; r < m_; ++r) {
      const auto& row = lp_.rows[r];
      double b = row.rhs;
      double scale = 1.0;
      for (std::size_t k = 0; k < row.index.size(); ++k) {
        b -= row.coef[k] * lp_.bounds[row.index[k]].lo;
        scale = std::max(scale, std::abs(row.coef[k]));
      }
      const double delta = kPerturbation * scale * (1.0 + std::abs(b)) * perturb(perturb_rng);
      double relaxed = b;
      if (row.sense == RowSense::less_equal) relaxed += delta;
      if (row.sense == RowSense::greater_equal) relaxed -= delta;
      double slack_coef = row.sense == RowSense::less_equal ? 1.0 : -1.0;
      if (relaxed < 0.0) {
        row_sign_[r] = -1.0;
        slack_coef = -slack_coef;
      }
      rhs_[r] = row_sign_[r] * relaxed;
      rhs_exact_[r] = row_sign_[r] * b;
      needs_art[r] = row.sense == RowSense::equal || slack_coef < 0.0;
    }
    first_art_ = n_ + n_slack;
    n_art_ = static_cast<int>(std::count(needs_art.begin(), needs_art.end(), true));
    ncols_ = first_art_ + n_art_;
    stride_ = ncols_ + 1;  // last column carries B^-1 b

    tab_.assign(static_cast<std::size_t>(m_) * stride_, 0.0);
    upper_.assign(ncols_, kInf);
    at_upper_.assign(ncols_, false);
    basis_.assign(m_, -1);
    is_basic_.assign(ncols_, false);
    slack_col_ = slack_of;
    art_col_.assign(m_, -1);
    unit_col_.assign(m_, -1);
    unit_coef_.assign(m_, 1.0);
    for (int j = 0; j < n_; ++j) upper_[j] = lp_.bounds[j].hi - lp_.bounds[j].lo;

    int next_art = first_art_;
    for (int r = 0; r < m_; ++r) {
      const auto& row = lp_.rows[r];
      double* t = row_ptr(r);
      for (std::size_t k = 0; k < row.index.size(); ++k) t[row.index[k]] += row_sign_[r] * row.coef[k];
      if (slack_of[r] >= 0) t[slack_of[r]] = row_sign_[r] * (row.sense == RowSense::less_equal ? 1.0 : -1.0);
      t[ncols_] = rhs_[r];
      if (needs_art[r]) {
        art_col_[r] = next_art;
        t[next_art] = 1.0;
        basis_[r] = next_art++;
        unit_coef_[r] = 1.0;
      } else {
        basis_[r] = slack_of[r];
        unit_coef_[r] = t[slack_of[r]];
      }
      unit_col_[r] = basis_[r];
      is_basic_[basis_[r]] = true;
    }
    beta_.assign(rhs_.begin(), rhs_.end());
  }

  double* row_ptr(int r) { return tab_.data() + static_cast<std::size_t>(r) * stride_; }
  const double* row_ptr(int r) const { return tab_.data() + static_cast<std::size_t>(r) * stride_; }

  double cost(int j, bool phase_one) const {
    if (phase_one) return j >= first_art_ ? 1.0 : 0.0;
    return j < n_ ? lp_.objective[j] : 0.0;
  }

  void set_phase_costs(bool phase_one) {
    phase_one_ = phase_one;
    reduced_.assign(ncols_, 0.0);
    for (int j = 0; j < ncols_; ++j) reduced_[j] = cost(j, phase_one);
    for (int r = 0; r < m_; ++r) {
      const double cb = cost(basis_[r], phase_one);
      if (cb == 0.0) continue;
      const double* t = row_ptr(r);
      for (int j = 0; j < ncols_; ++j) reduced_[j] -= cb * t[j];
    }
    for (int r = 0; r < m_; ++r) reduced_[basis_[r]] = 0.0;
  }

  double artificial_sum() const {
    double s = 0.0;
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] >= first_art_) s += beta_[r];
    }
    for (int j = first_art_; j < ncols_; ++j) {
      if (!is_basic_[j] && at_upper_[j]) s += upper_[j];
    }
    return s;
  }

  // Recompute basic values from the carried B^-1 b column.
  void refresh_beta() {
    for (int r = 0; r < m_; ++r) beta_[r] = row_ptr(r)[ncols_];
    for (int j = 0; j < ncols_; ++j) {
      if (is_basic_[j] || !at_upper_[j]) continue;
      for (int r = 0; r < m_; ++r) beta_[r] -= row_ptr(r)[j] * upper_[j];
    }
  }

  int price(bool bland) const {
    int best = -1;
    double best_score = 0.0;
    for (int j = 0; j < ncols_; ++j) {
      if (is_basic_[j] || upper_[j] <= 0.0) continue;
      const double d = reduced_[j];
      const bool eligible = at_upper_[j] ? d > kCostTol : d < -kCostTol;
      if (!eligible) continue;
      if (bland) return j;
      if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        best = j;
      }
    }
    return best;
  }

  LpStatus iterate(long cap) {
    int stall = 0;
    while (true) {
      if (iterations_ >= cap) return LpStatus::iteration_limit;
      const bool bland = options_.pricing == PricingRule::bland || stall >= kStallLimit;
      const int q = price(bland);
      if (q < 0) {
        refresh_beta();
        return LpStatus::optimal;
      }
      ++iterations_;
      const double dir = at_upper_[q] ? -1.0 : 1.0;

      // Harris two-pass ratio test: bound the step with slightly relaxed
      // limits, then pick a well-sized pivot among the rows that reach them.
      auto limit_of = [&](int r, double a, double slack) {
        if (a > kPivotTol) return (std::max(beta_[r], 0.0) + slack) / a;
        if (a < -kPivotTol && upper_[basis_[r]] < kInf) {
          return (std::max(upper_[basis_[r]] - beta_[r], 0.0) + slack) / -a;
        }
        return kInf;
      };
      double theta_max = upper_[q];
      for (int r = 0; r < m_; ++r) {
        const double a = dir * row_ptr(r)[q];
        theta_max = std::min(theta_max, limit_of(r, a, kHarrisTol));
      }
      double theta = upper_[q];
      int leave = -1;
      double leave_pivot = 0.0;
      if (theta_max < upper_[q]) {
        double cand_max = 0.0;
        for (int r = 0; r < m_; ++r) {
          const double a = dir * row_ptr(r)[q];
          if (limit_of(r, a, 0.0) <= theta_max) cand_max = std::max(cand_max, std::abs(a));
        }
        for (int r = 0; r < m_; ++r) {
          const double a = dir * row_ptr(r)[q];
          const double limit = limit_of(r, a, 0.0);
          if (limit > theta_max) continue;
          if (bland && std::abs(a) < 0.01 * cand_max) continue;
          const bool take = leave < 0 || (bland ? basis_[r] < basis_[leave]
                                                : std::abs(a) > std::abs(leave_pivot));
          if (take) {
            leave = r;
            leave_pivot = a;
            theta = limit;
          }
        }
      }
      if (leave < 0 && theta == kInf) return LpStatus::unbounded;
      stall = theta > 1e-12 ? 0 : stall + 1;

      for (int r = 0; r < m_; ++r) beta_[r] -= dir * row_ptr(r)[q] * theta;
      if (leave < 0) {  // entering variable runs to its opposite bound
        at_upper_[q] = !at_upper_[q];
        continue;
      }
      const double entering_value = (at_upper_[q] ? upper_[q] : 0.0) + dir * theta;
      const int out = basis_[leave];
      at_upper_[out] = leave_pivot < 0.0;  // increased to its upper bound
      is_basic_[out] = false;
      pivot(leave, q);
      basis_[leave] = q;
      is_basic_[q] = true;
      at_upper_[q] = false;
      beta_[leave] = entering_value;
      if (iterations_ % kRefreshInterval == 0) refresh_beta();
    }
  }

  // The columns that formed the initial identity now hold B^-1; use them to
  // replace the carried B^-1 b with the unperturbed right-hand side.
  void restore_exact_rhs() {
    std::vector<double> rho(m_, 0.0);
    for (int k = 0; k < m_; ++k) {
      const double b = rhs_exact_[k] / unit_coef_[k];
      if (b == 0.0) continue;
      const int col = unit_col_[k];
      for (int r = 0; r < m_; ++r) rho[r] += row_ptr(r)[col] * b;
    }
    for (int r = 0; r < m_; ++r) row_ptr(r)[ncols_] = rho[r];
    refresh_beta();
  }

  // Dual simplex pivots from a dual-feasible basis until the basic values sit
  // inside their bounds.
  LpStatus dual_cleanup(long cap) {
    constexpr double kFeasTol = 1e-12;
    while (true) {
      int r = -1;
      double worst = kFeasTol;
      for (int i = 0; i < m_; ++i) {
        const double below = -beta_[i];
        const double above = beta_[i] - upper_[basis_[i]];
        if (below > worst || above > worst) {
          worst = std::max(below, above);
          r = i;
        }
      }
      if (r < 0) return LpStatus::optimal;
      if (iterations_ >= cap) return LpStatus::iteration_limit;
      ++iterations_;
      const bool to_lower = beta_[r] < 0.0;
      const double target = to_lower ? 0.0 : upper_[basis_[r]];
      const double* tr = row_ptr(r);
      int q = -1;
      double best_ratio = kInf;
      double best_pivot = 0.0;
      for (int j = 0; j < ncols_; ++j) {
        if (is_basic_[j] || upper_[j] <= 0.0) continue;
        const double a = tr[j];
        if (std::abs(a) <= kPivotTol) continue;
        const double dir = at_upper_[j] ? -1.0 : 1.0;
        // moving j by dir changes beta_r by -a*dir
        const bool helps = to_lower ? a * dir < 0.0 : a * dir > 0.0;
        if (!helps) continue;
        const double ratio = std::abs(reduced_[j]) / std::abs(a);
        if (ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && std::abs(a) > std::abs(best_pivot))) {
          best_ratio = std::min(ratio, best_ratio);
          q = j;
          best_pivot = a;
        }
      }
      if (q < 0) return LpStatus::infeasible;
      const double dir = at_upper_[q] ? -1.0 : 1.0;
      const double theta = (beta_[r] - target) / (best_pivot * dir);
      for (int i = 0; i < m_; ++i) beta_[i] -= dir * row_ptr(i)[q] * theta;
      const double entering_value = (at_upper_[q] ? upper_[q] : 0.0) + dir * theta;
      const int out = basis_[r];
      at_upper_[out] = !to_lower;
      is_basic_[out] = false;
      pivot(r, q);
      basis_[r] = q;
      is_basic_[q] = true;
      at_upper_[q] = false;
      beta_[r] = entering_value;
    }
  }

  void pivot(int r, int q) {
    double* pr = row_ptr(r);
    const double inv = 1.0 / pr[q];
    nz_.clear();
    for (int j = 0; j <= ncols_; ++j) {
      if (pr[j] != 0.0) {
        pr[j] *= inv;
        nz_.push_back(j);
      }
    }
    pr[q] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* pi = row_ptr(i);
      const double f = pi[q];
      if (f == 0.0) continue;
      for (int j : nz_) pi[j] -= f * pr[j];
      pi[q] = 0.0;
    }
    const double f = reduced_[q];
    if (f != 0.0) {
      for (int j : nz_) {
        if (j < ncols_) reduced_[j] -= f * pr[j];
      }
      reduced_[q] = 0.0;
    }
  }

  // Re-solve B y_B = b - N y_N with a fresh sparse factorization.
  void polish() {
    if (m_ == 0) return;
    std::vector<Eigen::Triplet<double>> trip;
    // slack and artificial columns have a single entry in their owning row
    std::vector<int> owner(ncols_ - n_, -1);
    std::vector<double> owner_coef(ncols_ - n_, 0.0);
    for (int r = 0; r < m_; ++r) {
      if (slack_col_[r] >= 0) {
        owner[slack_col_[r] - n_] = r;
        owner_coef[slack_col_[r] - n_] = row_sign_[r] * (lp_.rows[r].sense == RowSense::less_equal ? 1.0 : -1.0);
      }
      if (art_col_[r] >= 0) {
        owner[art_col_[r] - n_] = r;
        owner_coef[art_col_[r] - n_] = 1.0;
      }
    }
    auto column_entries = [&](int j, auto&& emit) {
      if (j >= n_) emit(owner[j - n_], owner_coef[j - n_]);
    };
    std::vector<int> pos_in_basis(ncols_, -1);
    for (int r = 0; r < m_; ++r) pos_in_basis[basis_[r]] = r;
    Eigen::VectorXd rhs(m_);
    for (int r = 0; r < m_; ++r) rhs[r] = rhs_exact_[r];
    for (int r = 0; r < m_; ++r) {
      const auto& row = lp_.rows[r];
      for (std::size_t k = 0; k < row.index.size(); ++k) {
        const int j = row.index[k];
        const double a = row_sign_[r] * row.coef[k];
        if (pos_in_basis[j] >= 0) {
          trip.emplace_back(r, pos_in_basis[j], a);
        } else if (at_upper_[j]) {
          rhs[r] -= a * upper_[j];
        }
      }
    }
    for (int c = 0; c < m_; ++c) {
      column_entries(basis_[c], [&](int r, double v) { trip.emplace_back(r, c, v); });
    }
    for (int j = n_; j < ncols_; ++j) {
      if (pos_in_basis[j] < 0 && at_upper_[j]) {
        column_entries(j, [&](int r, double v) { rhs[r] -= v * upper_[j]; });
      }
    }
    Eigen::SparseMatrix<double> basis(m_, m_);
    basis.setFromTriplets(trip.begin(), trip.end());
    basis.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(basis);
    if (lu.info() != Eigen::Success) return;
    Eigen::VectorXd sol = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !sol.allFinite()) return;
    for (int r = 0; r < m_; ++r) beta_[r] = sol[r];
  }

  LpSolution& finish(LpSolution& sol, LpStatus status) {
    if (status == LpStatus::optimal) polish();
    sol.status = status;
    sol.iterations = iterations_;
    sol.values.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      if (!is_basic_[j]) sol.values[j] = lp_.bounds[j].lo + (at_upper_[j] ? upper_[j] : 0.0);
    }
    for (int r = 0; r < m_; ++r) {
      const int j = basis_[r];
      if (j < n_) sol.values[j] = lp_.bounds[j].lo + beta_[r];
    }
    // snap round-off onto the bounds
    for (int j = 0; j < n_; ++j) sol.values[j] = std::clamp(sol.values[j], lp_.bounds[j].lo, lp_.bounds[j].hi);
    sol.objective_value = objective_value(lp_, sol.values);
    return sol;
  }

  const LinearProgram& lp_;
  const SimplexOptions& options_;
  int n_ = 0, m_ = 0, ncols_ = 0, stride_ = 0, first_art_ = 0, n_art_ = 0;
  long iterations_ = 0;
  bool phase_one_ = false;
  std::vector<double> tab_, rhs_, rhs_exact_, row_sign_, beta_, upper_, reduced_, unit_coef_;
  std::vector<bool> at_upper_, is_basic_;
  std::vector<int> basis_, slack_col_, art_col_, unit_col_, nz_;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  if (!(options.tol > 0.0)) throw Error(ErrorCode::invalid_argument, "solver tolerance must be positive");
  Tableau t(lp, options);
  return t.run();
}

}  // namespace dlma
