#include <cmath>
#include <iomanip>
#include <ostream>

#include "dlma/simplex.hpp"

namespace dlma {
namespace {

// CPLEX-LP readers cap line length, so long expressions are wrapped.
void write_terms(std::ostream& out, const std::vector<int>& index, const std::vector<double>& coef) {
  bool any = false;
  int on_line = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (coef[k] == 0.0) continue;
    if (on_line == 8) {
      out << "\n   ";
      on_line = 0;
    }
    out << (coef[k] < 0.0 ? " - " : (any ? " + " : " ")) << std::abs(coef[k]) << " x" << index[k];
    any = true;
    ++on_line;
  }
  if (!any) out << " 0 x0";
}

}  // namespace

void write_lp_format(const LinearProgram& lp, std::ostream& out) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  out << "\\ dlma LAIC problem: " << lp.n_vars << " variables, " << lp.rows.size() << " rows\n";
  out << "Minimize\n obj:";
  std::vector<int> idx;
  std::vector<double> coef;
  for (int j = 0; j < lp.n_vars; ++j) {
    if (lp.objective[j] != 0.0) {
      idx.push_back(j);
      coef.push_back(lp.objective[j]);
    }
  }
  write_terms(out, idx, coef);
  out << "\nSubject To\n";
  for (std::size_t r = 0; r < lp.rows.size(); ++r) {
    const auto& row = lp.rows[r];
    out << " r" << r << ':';
    write_terms(out, row.index, row.coef);
    switch (row.sense) {
      case RowSense::less_equal: out << " <= "; break;
      case RowSense::greater_equal: out << " >= "; break;
      case RowSense::equal: out << " = "; break;
    }
    out << row.rhs << '\n';
  }
  out << "Bounds\n";
  for (int j = 0; j < lp.n_vars; ++j) {
    const auto& b = lp.bounds[j];
    if (std::isinf(b.hi)) {
      out << " x" << j << " >= " << b.lo << '\n';
    } else {
      out << ' ' << b.lo << " <= x" << j << " <= " << b.hi << '\n';
    }
  }
  out << "End\n";
  out.flags(flags);
  out.precision(precision);
}

}  // namespace dlma
