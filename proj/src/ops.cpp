#include "dlma/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dlma/error.hpp"

namespace dlma::nn {
namespace {

// Products run on Eigen-owned (aligned) matrices: on mapped heap buffers the
// vectorized kernels round differently depending on buffer alignment.
using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::dimension_mismatch, what);
}

struct ConvGeom {
  int n, c, h, w, o, k, stride, pad, ho, wo;
  int patch() const { return c * k * k; }
  int positions() const { return ho * wo; }
};

void im2col(const double* x, const ConvGeom& g, double* cols) {
  const int p = g.positions();
  for (int c = 0; c < g.c; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * p;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeom& g, double* dx) {
  const int p = g.positions();
  for (int c = 0; c < g.c; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * p;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          double* dst = dx + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          const double* src = row + oy * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Elementwise op with derivative computed from the input and output values.
template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xd[i]);
  return Tensor::from_op(x.shape(), std::move(out), {x}, [df](Node& self) {
    Node& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i] * df(in.data[i], self.data[i]);
  });
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  require(x.rank() == 4, "conv2d input must be (N,C,H,W), got " + shape_string(x.shape()));
  require(weight.rank() == 4 && weight.dim(2) == weight.dim(3), "conv2d weight must be (O,C,k,k)");
  require(weight.dim(1) == x.dim(1), "conv2d channel mismatch: input " + std::to_string(x.dim(1)) + ", weight " +
                                         std::to_string(weight.dim(1)));
  if (stride < 1 || padding < 0) throw Error(ErrorCode::invalid_argument, "conv2d stride/padding out of range");
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == static_cast<std::size_t>(weight.dim(0)), "conv2d bias size mismatch");

  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), stride, padding, 0, 0};
  g.ho = (g.h + 2 * g.pad - g.k) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / g.stride + 1;
  require(g.h + 2 * g.pad >= g.k && g.w + 2 * g.pad >= g.k, "conv2d kernel larger than padded input");

  const int kk = g.patch(), p = g.positions();
  std::vector<double> out(static_cast<std::size_t>(g.n) * g.o * p);
  MatR cols(kk, p), prod(g.o, p);
  const MatR wm = CMapR(weight.data().data(), g.o, kk);
  const std::size_t in_stride = static_cast<std::size_t>(g.c) * g.h * g.w;
  const std::size_t out_stride = static_cast<std::size_t>(g.o) * p;
  for (int n = 0; n < g.n; ++n) {
    im2col(x.data().data() + n * in_stride, g, cols.data());
    prod.noalias() = wm * cols;
    MapR om(out.data() + n * out_stride, g.o, p);
    om = prod;
    if (has_bias) {
      for (int o = 0; o < g.o; ++o) om.row(o).array() += bias.data()[o];
    }
  }

  std::vector<Tensor> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor::from_op({g.n, g.o, g.ho, g.wo}, std::move(out), std::move(parents), [g, has_bias](Node& self) {
    Node& in = *self.parents[0];
    Node& w = *self.parents[1];
    const int kk = g.patch(), p = g.positions();
    const std::size_t in_stride = static_cast<std::size_t>(g.c) * g.h * g.w;
    const std::size_t out_stride = static_cast<std::size_t>(g.o) * p;
    MatR cols(kk, p), dw = MatR::Zero(g.o, kk);
    const MatR wm = CMapR(w.data.data(), g.o, kk);
    for (int n = 0; n < g.n; ++n) {
      const MatR dy = CMapR(self.grad.data() + n * out_stride, g.o, p);
      if (w.requires_grad) {
        im2col(in.data.data() + n * in_stride, g, cols.data());
        dw.noalias() += dy * cols.transpose();
      }
      if (in.requires_grad) {
        cols.noalias() = wm.transpose() * dy;
        col2im_add(cols.data(), g, in.grad.data() + n * in_stride);
      }
      if (has_bias && self.parents[2]->requires_grad) {
        Node& b = *self.parents[2];
        for (int o = 0; o < g.o; ++o) {
          double acc = 0.0;
          for (long k = 0; k < p; ++k) acc += dy(o, k);
          b.grad[o] += acc;
        }
      }
    }
    if (w.requires_grad) MapR(w.grad.data(), g.o, kk) += dw;
  });
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats, NormMode mode,
                 bool update_running) {
  require(x.rank() >= 2, "batchnorm input must be (N,C,...)");
  const int n = x.dim(0), c = x.dim(1);
  require(gamma.numel() == static_cast<std::size_t>(c) && beta.numel() == static_cast<std::size_t>(c),
          "batchnorm parameter size mismatch");
  require(stats.mean.size() == static_cast<std::size_t>(c) && stats.var.size() == static_cast<std::size_t>(c),
          "batchnorm running statistics size mismatch");
  const std::size_t inner = x.numel() / (static_cast<std::size_t>(n) * c);
  const double m = static_cast<double>(n) * inner;
  auto at = [&](int s, int ch) { return (static_cast<std::size_t>(s) * c + ch) * inner; };

  std::vector<double> mean(c), inv_std(c);
  auto xd = x.data();
  if (mode == NormMode::training) {
    for (int ch = 0; ch < c; ++ch) {
      double s1 = 0.0;
      for (int s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < inner; ++i) s1 += xd[at(s, ch) + i];
      }
      const double mu = s1 / m;
      double s2 = 0.0;
      for (int s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = xd[at(s, ch) + i] - mu;
          s2 += d * d;
        }
      }
      const double var = s2 / m;
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + kNormEps);
      if (update_running) {
        const double unbiased = m > 1 ? var * m / (m - 1) : var;
        stats.mean[ch] = (1 - stats.momentum) * stats.mean[ch] + stats.momentum * mu;
        stats.var[ch] = (1 - stats.momentum) * stats.var[ch] + stats.momentum * unbiased;
      }
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = stats.mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(stats.var[ch] + kNormEps);
    }
  }

  std::vector<double> out(x.numel());
  auto gd = gamma.data(), bd = beta.data();
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = at(s, ch);
      for (std::size_t i = 0; i < inner; ++i) out[base + i] = gd[ch] * (xd[base + i] - mean[ch]) * inv_std[ch] + bd[ch];
    }
  }

  const bool batch_stats = mode == NormMode::training;
  return Tensor::from_op(x.shape(), std::move(out), {x, gamma, beta},
                         [n, c, inner, m, mean, inv_std, batch_stats](Node& self) {
    Node& in = *self.parents[0];
    Node& ga = *self.parents[1];
    Node& be = *self.parents[2];
    auto at = [&](int s, int ch) { return (static_cast<std::size_t>(s) * c + ch) * inner; };
    for (int ch = 0; ch < c; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int s = 0; s < n; ++s) {
        const std::size_t base = at(s, ch);
        for (std::size_t i = 0; i < inner; ++i) {
          const double xhat = (in.data[base + i] - mean[ch]) * inv_std[ch];
          sum_dy += self.grad[base + i];
          sum_dy_xhat += self.grad[base + i] * xhat;
        }
      }
      if (ga.requires_grad) ga.grad[ch] += sum_dy_xhat;
      if (be.requires_grad) be.grad[ch] += sum_dy;
      if (!in.requires_grad) continue;
      const double g = ga.data[ch] * inv_std[ch];
      for (int s = 0; s < n; ++s) {
        const std::size_t base = at(s, ch);
        for (std::size_t i = 0; i < inner; ++i) {
          double d = self.grad[base + i];
          if (batch_stats) {
            const double xhat = (in.data[base + i] - mean[ch]) * inv_std[ch];
            d -= (sum_dy + xhat * sum_dy_xhat) / m;
          }
          in.grad[base + i] += g * d;
        }
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(x, [slope](double v) { return v > 0 ? v : slope * v; },
               [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(x.rank() >= 1 && weight.rank() == 2, "linear expects weight (O,F)");
  const int n = x.dim(0);
  const int f = static_cast<int>(x.numel() / n);
  const int o = weight.dim(0);
  require(weight.dim(1) == f, "linear feature mismatch: input " + std::to_string(f) + ", weight " +
                                  std::to_string(weight.dim(1)));
  require(bias.numel() == static_cast<std::size_t>(o), "linear bias size mismatch");
  std::vector<double> out(static_cast<std::size_t>(n) * o);
  const MatR prod = MatR(CMapR(x.data().data(), n, f)) * MatR(CMapR(weight.data().data(), o, f)).transpose();
  MapR om(out.data(), n, o);
  om = prod;
  for (int s = 0; s < n; ++s) {
    for (int j = 0; j < o; ++j) om(s, j) += bias.data()[j];
  }
  return Tensor::from_op({n, o}, std::move(out), {x, weight, bias}, [n, f, o](Node& self) {
    Node& in = *self.parents[0];
    Node& w = *self.parents[1];
    Node& b = *self.parents[2];
    const MatR dy = CMapR(self.grad.data(), n, o);
    if (in.requires_grad) MapR(in.grad.data(), n, f) += MatR(dy * MatR(CMapR(w.data.data(), o, f)));
    if (w.requires_grad) MapR(w.grad.data(), o, f) += MatR(dy.transpose() * MatR(CMapR(in.data.data(), n, f)));
    if (b.requires_grad) {
      for (int j = 0; j < o; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += dy(i, j);
        b.grad[j] += acc;
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor clamp01(const Tensor& x) {
  return unary(x, [](double v) { return std::clamp(v, 0.0, 1.0); },
               [](double v, double) { return (v >= 0.0 && v <= 1.0) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::from_op({1}, {s}, {x}, [](Node& self) {
    Node& in = *self.parents[0];
    for (double& g : in.grad) g += self.grad[0];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(), "reshape to " + shape_string(shape) + " changes element count");
  return Tensor::from_op(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), {x},
                         [](Node& self) {
    Node& in = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

}  // namespace dlma::nn
