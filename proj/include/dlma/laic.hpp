#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dlma/raster.hpp"
#include "dlma/simplex.hpp"

namespace dlma {

struct GridSize {
  int height = 0;
  int width = 0;
  friend bool operator==(const GridSize&, const GridSize&) = default;
};

/// Images with at most this many pixels are solved at full resolution when no
/// gain grid is configured; larger ones use kAutoGainGrid.
inline constexpr long kFullResolutionMaxPixels = 16L * 16L;
inline constexpr GridSize kAutoGainGrid{16, 16};

struct LaicOptions {
  double lambda2 = 0.05;              // local-contrast weight
  int radius = 7;                     // neighbourhood half-width, in solve-grid pixels
  double eps = kDivideGuard;          // gain denominator guard
  std::optional<GridSize> gain_grid;  // unset: automatic policy above
  double solver_tol = 1e-7;
  PricingRule pricing = PricingRule::dantzig;
  long max_iterations = 0;            // 0: 50 * n_vars

  void validate() const;
};

/// Box mean over the (2r+1)^2 window clipped at the borders, per channel.
Raster local_mean(const Raster& r, int radius);

/// The assembled LP. Variables: H*W pixel values (row-major), then one TV
/// auxiliary per horizontal neighbour pair, then one per vertical pair.
/// Rows: two per auxiliary (t >= +d, t >= -d), then one rank row per pixel
/// (an equality where the pixel equals its local mean).
struct LaicProblem {
  int height = 0;
  int width = 0;
  int radius = 0;
  double lambda2 = 0.0;
  double eps = 0.0;
  int n_pixels = 0;
  int n_aux = 0;
  int n_aux_rows = 0;
  int n_rank_rows = 0;
  LinearProgram lp;
  std::vector<std::int8_t> sign_map;  // sgn(J_a - mean(J_a)), 0 on ties
  std::vector<double> gain_weight;    // 1 / max(J_a, eps)
  Raster input;                       // J_a (one channel)
  Raster input_mean;                  // mean(J_a)
};

/// sgn(a - mean) with ties (|a - mean| <= 1e-12) mapped to 0.
std::vector<std::int8_t> rank_signs(const Raster& input, const Raster& mean);

LaicProblem build_lp(const Raster& luma, const LaicOptions& opts);

/// Solves the problem; with lambda2 == 0 the brightest uniform-gain optimum is
/// returned when it is feasible.
LpSolution solve_laic(const LaicProblem& problem, const LaicOptions& opts);

/// Pixel part of an LP point as an image (values clamped to [0,1]).
Raster solution_image(const LaicProblem& problem, std::span<const double> values);

/// Objective recomputed from pixel values alone:
/// TV(gain) - lambda2 * sum s(i) (x(i) - mean(x)(i)).
double laic_objective(const LaicProblem& problem, std::span<const double> pixels);

struct LaicAudit {
  double bound_violation = 0.0;  // worst excursion outside [0,1]
  double rank_violation = 0.0;   // worst violated rank row
  bool passes(double tol) const { return bound_violation <= tol && rank_violation <= tol; }
};
LaicAudit audit(const LaicProblem& problem, std::span<const double> pixels);

/// Grid actually used for an image of the given size (full resolution when
/// no grid applies).
GridSize solve_grid(int height, int width, const LaicOptions& opts);

/// The problem laic_enhance solves for `r`: its luma, box-averaged onto the
/// solve grid.
LaicProblem grid_problem(const Raster& r, const LaicOptions& opts);

/// Split luma, solve on the gain grid (or full resolution), apply the gain and
/// recombine chroma. Throws Error(solver_failure) unless the solve is optimal.
Raster laic_enhance(const Raster& r, const LaicOptions& opts);

}  // namespace dlma
