#include <algorithm>

#include "dlma/error.hpp"
#include "dlma/trainer.hpp"

namespace dlma {
namespace {

struct Span {
  int start;
  int size;
};

std::vector<Span> tile_spans(int length, int tile, int overlap) {
  if (length <= tile) return {{0, length}};
  std::vector<Span> spans;
  const int step = tile - overlap;
  int s = 0;
  for (; s + tile < length; s += step) spans.push_back({s, tile});
  spans.push_back({length - tile, tile});
  return spans;
}

// Linear ramp over `overlap` pixels at edges shared with a neighbouring tile.
double feather(const Span& span, int length, int i, int overlap) {
  double w = 1.0;
  if (span.start > 0) w = std::min(w, (i + 0.5) / overlap);
  if (span.start + span.size < length) w = std::min(w, (span.size - i - 0.5) / overlap);
  return w;
}

}  // namespace

Raster dequantize(nn::Generator& g, const Raster& stretched, const TileOptions& tiles) {
  if (stretched.channels() != g.config().channels) {
    throw Error(ErrorCode::dimension_mismatch, "image has " + std::to_string(stretched.channels()) +
                                                   " channels but the network expects " +
                                                   std::to_string(g.config().channels));
  }
  if (tiles.tile < 1 || tiles.overlap < 1 || tiles.overlap >= tiles.tile) {
    throw Error(ErrorCode::invalid_argument, "tile size must exceed a positive overlap");
  }
  if (stretched.empty()) return stretched;

  nn::NoGradGuard no_grad;
  const int h = stretched.height(), w = stretched.width(), c = stretched.channels();
  std::vector<double> acc(stretched.size(), 0.0), weight(stretched.pixel_count(), 0.0);
  for (const Span& ys : tile_spans(h, tiles.tile, tiles.overlap)) {
    for (const Span& xs : tile_spans(w, tiles.tile, tiles.overlap)) {
      const Raster crop = stretched.crop(ys.start, xs.start, ys.size, xs.size);
      const nn::Tensor res = g.forward(nn::images_to_tensor({&crop}), nn::NormMode::inference);
      auto rd = res.data();
      for (int y = 0; y < ys.size; ++y) {
        const double wy = feather(ys, h, y, tiles.overlap);
        for (int x = 0; x < xs.size; ++x) {
          const double wt = wy * feather(xs, w, x, tiles.overlap);
          const std::size_t pix = static_cast<std::size_t>(ys.start + y) * w + xs.start + x;
          weight[pix] += wt;
          for (int ch = 0; ch < c; ++ch) {
            acc[pix * c + ch] += wt * rd[(static_cast<std::size_t>(ch) * ys.size + y) * xs.size + x];
          }
        }
      }
    }
  }

  Raster out(h, w, c);
  auto src = stretched.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(src[i] + acc[i] / weight[i / c], 0.0, 1.0);
  return out;
}

}  // namespace dlma
