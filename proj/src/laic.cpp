#include "dlma/laic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dlma/error.hpp"

namespace dlma {

void LaicOptions::validate() const {
  if (!(lambda2 >= 0.0)) throw Error(ErrorCode::invalid_argument, "lambda2 must be non-negative");
  if (radius < 1) throw Error(ErrorCode::invalid_argument, "radius must be at least 1");
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "eps must be positive");
  if (!(solver_tol > 0.0)) throw Error(ErrorCode::invalid_argument, "solver_tol must be positive");
  if (gain_grid && (gain_grid->height < 1 || gain_grid->width < 1)) {
    throw Error(ErrorCode::invalid_argument, "gain grid must be at least 1x1");
  }
}

Raster local_mean(const Raster& r, int radius) {
  if (radius < 1) throw Error(ErrorCode::invalid_argument, "radius must be at least 1");
  const int h = r.height(), w = r.width(), c = r.channels();
  // summed-area table with a zero border row/column
  std::vector<double> sat(static_cast<std::size_t>(h + 1) * (w + 1) * c, 0.0);
  auto at = [&](int y, int x, int k) -> double& { return sat[(static_cast<std::size_t>(y) * (w + 1) + x) * c + k]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        at(y + 1, x + 1, k) = r.at(y, x, k) + at(y, x + 1, k) + at(y + 1, x, k) - at(y, x, k);
      }
    }
  }
  Raster out(h, w, c);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius), y1 = std::min(h, y + radius + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius), x1 = std::min(w, x + radius + 1);
      const double count = static_cast<double>((y1 - y0) * (x1 - x0));
      for (int k = 0; k < c; ++k) {
        const double sum = at(y1, x1, k) - at(y0, x1, k) - at(y1, x0, k) + at(y0, x0, k);
        out.at(y, x, k) = std::clamp(sum / count, 0.0, 1.0);
      }
    }
  }
  return out;
}

std::vector<std::int8_t> rank_signs(const Raster& input, const Raster& mean) {
  if (!input.same_shape(mean)) throw Error(ErrorCode::dimension_mismatch, "input and mean differ in shape");
  std::vector<std::int8_t> s(input.size());
  auto a = input.data();
  auto m = mean.data();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = a[i] - m[i];
    s[i] = std::abs(d) <= 1e-12 ? 0 : (d > 0.0 ? 1 : -1);
  }
  return s;
}

namespace {

struct Window {
  int y0, y1, x0, x1;
  int count() const { return (y1 - y0) * (x1 - x0); }
};

Window window_at(int y, int x, int h, int w, int radius) {
  return {std::max(0, y - radius), std::min(h, y + radius + 1), std::max(0, x - radius),
          std::min(w, x + radius + 1)};
}

}  // namespace

LaicProblem build_lp(const Raster& luma, const LaicOptions& opts) {
  opts.validate();
  if (luma.channels() != 1) throw Error(ErrorCode::invalid_argument, "LAIC operates on a single-channel luma");
  LaicProblem p;
  p.height = luma.height();
  p.width = luma.width();
  p.radius = opts.radius;
  p.lambda2 = opts.lambda2;
  p.eps = opts.eps;
  p.input = luma;
  p.input_mean = local_mean(luma, opts.radius);
  p.sign_map = rank_signs(p.input, p.input_mean);

  const int h = p.height, w = p.width;
  const int n = h * w;
  p.n_pixels = n;
  const int n_horiz = h * std::max(0, w - 1);
  const int n_vert = std::max(0, h - 1) * w;
  p.n_aux = n_horiz + n_vert;

  auto& lp = p.lp;
  lp.n_vars = n + p.n_aux;
  lp.objective.assign(lp.n_vars, 0.0);
  lp.bounds.assign(lp.n_vars, VarBounds{});
  for (int i = 0; i < n; ++i) lp.bounds[i] = {0.0, 1.0};

  p.gain_weight.resize(n);
  auto ja = luma.data();
  for (int i = 0; i < n; ++i) p.gain_weight[i] = 1.0 / std::max(ja[i], opts.eps);

  // TV of the gain: t >= +-(g(j) - g(i)) for each neighbour pair.
  int aux = n;
  auto add_pair = [&](int i, int j) {
    lp.objective[aux] = 1.0;
    const double wi = p.gain_weight[i], wj = p.gain_weight[j];
    lp.rows.push_back({{aux, j, i}, {1.0, -wj, wi}, RowSense::greater_equal, 0.0});
    lp.rows.push_back({{aux, j, i}, {1.0, wj, -wi}, RowSense::greater_equal, 0.0});
    ++aux;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) add_pair(y * w + x, y * w + x + 1);
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) add_pair(y * w + x, (y + 1) * w + x);
  }
  p.n_aux_rows = static_cast<int>(lp.rows.size());

  // Contrast term -lambda2 * sum_i s(i) (x(i) - mean_i(x)) and rank rows.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      const Window win = window_at(y, x, h, w, opts.radius);
      const double inv = 1.0 / win.count();
      const int s = p.sign_map[i];

      LpRow row;
      row.index.reserve(win.count());
      row.coef.reserve(win.count());
      for (int yy = win.y0; yy < win.y1; ++yy) {
        for (int xx = win.x0; xx < win.x1; ++xx) {
          const int k = yy * w + xx;
          row.index.push_back(k);
          row.coef.push_back(k == i ? 1.0 - inv : -inv);
          if (s != 0) lp.objective[k] += opts.lambda2 * s * inv;
        }
      }
      if (s != 0) lp.objective[i] -= opts.lambda2 * s;
      row.sense = s > 0 ? RowSense::greater_equal : (s < 0 ? RowSense::less_equal : RowSense::equal);
      lp.rows.push_back(std::move(row));
    }
  }
  p.n_rank_rows = static_cast<int>(lp.rows.size()) - p.n_aux_rows;
  return p;
}

double laic_objective(const LaicProblem& p, std::span<const double> x) {
  const int h = p.height, w = p.width;
  double tv = 0.0;
  auto gain = [&](int i) { return x[i] * p.gain_weight[i]; };
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const int i = y * w + xx;
      if (xx + 1 < w) tv += std::abs(gain(i + 1) - gain(i));
      if (y + 1 < h) tv += std::abs(gain(i + w) - gain(i));
    }
  }
  double contrast = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const int i = y * w + xx;
      if (p.sign_map[i] == 0) continue;
      const Window win = window_at(y, xx, h, w, p.radius);
      double sum = 0.0;
      for (int yy = win.y0; yy < win.y1; ++yy) {
        for (int k = win.x0; k < win.x1; ++k) sum += x[yy * w + k];
      }
      contrast += p.sign_map[i] * (x[i] - sum / win.count());
    }
  }
  return tv - p.lambda2 * contrast;
}

LaicAudit audit(const LaicProblem& p, std::span<const double> x) {
  LaicAudit a;
  for (int i = 0; i < p.n_pixels; ++i) a.bound_violation = std::max({a.bound_violation, -x[i], x[i] - 1.0});
  for (int r = p.n_aux_rows; r < static_cast<int>(p.lp.rows.size()); ++r) {
    const auto& row = p.lp.rows[r];
    const double v = row_activity(row, x);
    double viol = 0.0;
    switch (row.sense) {
      case RowSense::greater_equal: viol = -v; break;
      case RowSense::less_equal: viol = v; break;
      case RowSense::equal: viol = std::abs(v); break;
    }
    a.rank_violation = std::max(a.rank_violation, viol);
  }
  return a;
}

LpSolution solve_laic(const LaicProblem& problem, const LaicOptions& opts) {
  opts.validate();
  SimplexOptions so;
  so.tol = opts.solver_tol;
  so.max_iterations = opts.max_iterations;
  so.pricing = opts.pricing;
  LpSolution sol = solve_lp(problem.lp, so);
  if (sol.status != LpStatus::optimal || problem.lambda2 != 0.0 || problem.n_pixels == 0) return sol;

  // Every uniform gain is optimal at lambda2 = 0; prefer the brightest one.
  std::vector<double> base(problem.n_pixels);
  for (int i = 0; i < problem.n_pixels; ++i) base[i] = 1.0 / problem.gain_weight[i];
  const double peak = *std::max_element(base.begin(), base.end());
  std::vector<double> candidate(problem.lp.n_vars, 0.0);
  for (int i = 0; i < problem.n_pixels; ++i) candidate[i] = std::min(1.0, base[i] / peak);
  const int w = problem.width, h = problem.height;
  int aux = problem.n_pixels;
  auto fill = [&](int i, int j) {
    candidate[aux++] = std::abs(candidate[j] * problem.gain_weight[j] - candidate[i] * problem.gain_weight[i]);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) fill(y * w + x, y * w + x + 1);
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) fill(y * w + x, (y + 1) * w + x);
  }
  const double obj = objective_value(problem.lp, candidate);
  if (max_violation(problem.lp, candidate) <= opts.solver_tol && obj <= sol.objective_value + opts.solver_tol) {
    sol.values = std::move(candidate);
    sol.objective_value = obj;
  }
  return sol;
}

Raster solution_image(const LaicProblem& problem, std::span<const double> values) {
  Raster out(problem.height, problem.width, 1);
  auto dst = out.data();
  for (int i = 0; i < problem.n_pixels; ++i) dst[i] = std::clamp(values[i], 0.0, 1.0);
  return out;
}

GridSize solve_grid(int height, int width, const LaicOptions& opts) {
  GridSize g{height, width};
  if (opts.gain_grid) {
    g = *opts.gain_grid;
  } else if (static_cast<long>(height) * width > kFullResolutionMaxPixels) {
    g = kAutoGainGrid;
  }
  return {std::min(g.height, height), std::min(g.width, width)};
}

namespace {

Raster box_downsample(const Raster& src, GridSize g) {
  Raster out(g.height, g.width, 1);
  for (int gy = 0; gy < g.height; ++gy) {
    const int y0 = static_cast<int>(static_cast<long>(gy) * src.height() / g.height);
    const int y1 = static_cast<int>(static_cast<long>(gy + 1) * src.height() / g.height);
    for (int gx = 0; gx < g.width; ++gx) {
      const int x0 = static_cast<int>(static_cast<long>(gx) * src.width() / g.width);
      const int x1 = static_cast<int>(static_cast<long>(gx + 1) * src.width() / g.width);
      double sum = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) sum += src.at(y, x);
      }
      out.at(gy, gx) = std::clamp(sum / ((y1 - y0) * (x1 - x0)), 0.0, 1.0);
    }
  }
  return out;
}

// Pixel-centre aligned bilinear interpolation of a coarse field.
double sample_bilinear(const std::vector<double>& field, GridSize g, double fy, double fx) {
  fy = std::clamp(fy, 0.0, static_cast<double>(g.height - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(g.width - 1));
  const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
  const int y1 = std::min(y0 + 1, g.height - 1), x1 = std::min(x0 + 1, g.width - 1);
  const double ty = fy - y0, tx = fx - x0;
  auto f = [&](int y, int x) { return field[static_cast<std::size_t>(y) * g.width + x]; };
  return (1 - ty) * ((1 - tx) * f(y0, x0) + tx * f(y0, x1)) + ty * ((1 - tx) * f(y1, x0) + tx * f(y1, x1));
}

}  // namespace

LaicProblem grid_problem(const Raster& r, const LaicOptions& opts) {
  opts.validate();
  const Raster luma = split_luma(r).luma;
  const GridSize g = solve_grid(r.height(), r.width(), opts);
  const bool full = g.height == r.height() && g.width == r.width();
  return build_lp(full ? luma : box_downsample(luma, g), opts);
}

Raster laic_enhance(const Raster& r, const LaicOptions& opts) {
  opts.validate();
  if (r.empty()) return r;
  const LumaSplit split = split_luma(r);
  const GridSize g = solve_grid(r.height(), r.width(), opts);
  const bool full = g.height == r.height() && g.width == r.width();

  const LaicProblem problem = build_lp(full ? split.luma : box_downsample(split.luma, g), opts);
  const LpSolution sol = solve_laic(problem, opts);
  if (sol.status != LpStatus::optimal) {
    throw Error(ErrorCode::solver_failure, std::string("LAIC solve ended with status ") + to_string(sol.status));
  }

  Raster luma_out;
  if (full) {
    luma_out = solution_image(problem, sol.values);
  } else {
    std::vector<double> gain(problem.n_pixels);
    for (int i = 0; i < problem.n_pixels; ++i) gain[i] = sol.values[i] * problem.gain_weight[i];
    luma_out = Raster(r.height(), r.width(), 1);
    const double sy = static_cast<double>(g.height) / r.height();
    const double sx = static_cast<double>(g.width) / r.width();
    for (int y = 0; y < r.height(); ++y) {
      for (int x = 0; x < r.width(); ++x) {
        const double gain_here = sample_bilinear(gain, g, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
        luma_out.at(y, x) = std::clamp(gain_here * split.luma.at(y, x), 0.0, 1.0);
      }
    }
  }
  return recombine_luma(luma_out, split.ratios);
}

}  // namespace dlma
