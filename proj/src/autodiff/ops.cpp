#include "voxelcast/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace voxelcast::ad {

std::string shape_string(const Shape& s) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? ", " : "") << s[i];
  out << ')';
  return out.str();
}

namespace {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

template <class T>
void accumulate(std::vector<T>& dst, std::span<const T> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

// ---------------------------------------------------------------------------
// Convolution over up to three spatial axes. 2D maps are handled as volumes
// with depth 1.

struct ConvGeometry {
  std::size_t n, in[3], c, k[3], out_c, out[3];
  int stride[3], pad[3];

  std::size_t in_index(std::size_t b, std::size_t h, std::size_t w, std::size_t d) const {
    return (((b * in[0] + h) * in[1] + w) * in[2] + d) * c;
  }
  std::size_t out_positions() const { return out[0] * out[1] * out[2]; }
  std::size_t patch() const { return k[0] * k[1] * k[2] * c; }
};

ConvGeometry conv_geometry(const Shape& xs, const Shape& ks, std::size_t spatial, const ConvOptions& opt) {
  require(opt.stride >= 1, "conv stride must be >= 1");
  require(opt.padding >= 0, "conv padding must be >= 0");
  require(xs.size() == spatial + 2, "conv input must have rank " + std::to_string(spatial + 2) + ", got " +
                                        shape_string(xs));
  require(ks.size() == spatial + 2, "conv kernel must have rank " + std::to_string(spatial + 2) + ", got " +
                                        shape_string(ks));
  ConvGeometry g{};
  g.n = xs[0];
  g.c = xs.back();
  require(ks[spatial] == g.c, "conv channel mismatch: input " + shape_string(xs) + ", kernel " + shape_string(ks));
  g.out_c = ks.back();
  for (std::size_t a = 0; a < 3; ++a) {
    if (a < spatial) {
      g.in[a] = xs[1 + a];
      g.k[a] = ks[a];
      g.stride[a] = opt.stride;
      g.pad[a] = opt.padding;
    } else {
      g.in[a] = 1;
      g.k[a] = 1;
      g.stride[a] = 1;
      g.pad[a] = 0;
    }
    const long span = static_cast<long>(g.in[a]) + 2L * g.pad[a] - static_cast<long>(g.k[a]);
    require(span >= 0, "conv kernel larger than padded input");
    g.out[a] = static_cast<std::size_t>(span / g.stride[a] + 1);
  }
  return g;
}

Shape conv_output_shape(const ConvGeometry& g, std::size_t spatial) {
  Shape s{g.n};
  for (std::size_t a = 0; a < spatial; ++a) s.push_back(g.out[a]);
  s.push_back(g.out_c);
  return s;
}

/// Calls fn(out_position, patch_offset, input_offset) for every in-bounds tap.
/// input_offset addresses the first channel of the tapped voxel.
template <class Fn>
void for_each_tap(const ConvGeometry& g, std::size_t b, Fn&& fn) {
  std::size_t row = 0;
  for (std::size_t oh = 0; oh < g.out[0]; ++oh)
    for (std::size_t ow = 0; ow < g.out[1]; ++ow)
      for (std::size_t od = 0; od < g.out[2]; ++od, ++row) {
        std::size_t tap = 0;
        for (std::size_t kh = 0; kh < g.k[0]; ++kh) {
          const long ih = static_cast<long>(oh) * g.stride[0] - g.pad[0] + static_cast<long>(kh);
          for (std::size_t kw = 0; kw < g.k[1]; ++kw) {
            const long iw = static_cast<long>(ow) * g.stride[1] - g.pad[1] + static_cast<long>(kw);
            for (std::size_t kd = 0; kd < g.k[2]; ++kd, ++tap) {
              const long id = static_cast<long>(od) * g.stride[2] - g.pad[2] + static_cast<long>(kd);
              if (ih < 0 || iw < 0 || id < 0 || ih >= static_cast<long>(g.in[0]) ||
                  iw >= static_cast<long>(g.in[1]) || id >= static_cast<long>(g.in[2]))
                continue;
              fn(row, tap * g.c, g.in_index(b, ih, iw, id));
            }
          }
        }
      }
}

template <class T>
void im2col(const ConvGeometry& g, std::size_t b, const T* x, T* cols) {
  const std::size_t k = g.patch();
  std::fill(cols, cols + g.out_positions() * k, T(0));
  for_each_tap(g, b, [&](std::size_t row, std::size_t offset, std::size_t src) {
    std::memcpy(cols + row * k + offset, x + src, g.c * sizeof(T));
  });
}

template <class T>
void col2im_add(const ConvGeometry& g, std::size_t b, const T* cols, T* dx) {
  const std::size_t k = g.patch();
  for_each_tap(g, b, [&](std::size_t row, std::size_t offset, std::size_t dst) {
    const T* src = cols + row * k + offset;
    for (std::size_t c = 0; c < g.c; ++c) dx[dst + c] += src[c];
  });
}

template <class T>
void conv_forward(const ConvGeometry& g, ConvAlgorithm algo, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t rows = g.out_positions(), k = g.patch(), o = g.out_c;
  if (algo == ConvAlgorithm::im2col) {
    std::vector<T> cols(rows * k);
    const ConstMatrixMap<T> wm(w, k, o);
    for (std::size_t b = 0; b < g.n; ++b) {
      im2col(g, b, x, cols.data());
      MatrixMap<T> ym(y + b * rows * o, rows, o);
      ym.noalias() = ConstMatrixMap<T>(cols.data(), rows, k) * wm;
      if (bias)
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < o; ++j) ym(r, j) += bias[j];
    }
    return;
  }
  for (std::size_t b = 0; b < g.n; ++b) {
    T* yb = y + b * rows * o;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < o; ++j) yb[r * o + j] = bias ? bias[j] : T(0);
    for_each_tap(g, b, [&](std::size_t row, std::size_t offset, std::size_t src) {
      for (std::size_t c = 0; c < g.c; ++c) {
        const T xv = x[src + c];
        const T* wrow = w + (offset + c) * o;
        for (std::size_t j = 0; j < o; ++j) yb[row * o + j] += xv * wrow[j];
      }
    });
  }
}

template <class T>
void conv_backward(const ConvGeometry& g, ConvAlgorithm algo, const T* x, const T* w, const T* dy, T* dx, T* dw,
                   T* db) {
  const std::size_t rows = g.out_positions(), k = g.patch(), o = g.out_c;
  if (db)
    for (std::size_t b = 0; b < g.n; ++b)
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < o; ++j) db[j] += dy[(b * rows + r) * o + j];
  if (algo == ConvAlgorithm::im2col) {
    std::vector<T> cols(rows * k);
    const ConstMatrixMap<T> wm(w, k, o);
    for (std::size_t b = 0; b < g.n; ++b) {
      const ConstMatrixMap<T> dym(dy + b * rows * o, rows, o);
      if (dw) {
        im2col(g, b, x, cols.data());
        MatrixMap<T>(dw, k, o).noalias() += ConstMatrixMap<T>(cols.data(), rows, k).transpose() * dym;
      }
      if (dx) {
        MatrixMap<T>(cols.data(), rows, k).noalias() = dym * wm.transpose();
        col2im_add(g, b, cols.data(), dx);
      }
    }
    return;
  }
  for (std::size_t b = 0; b < g.n; ++b) {
    const T* dyb = dy + b * rows * o;
    for_each_tap(g, b, [&](std::size_t row, std::size_t offset, std::size_t src) {
      for (std::size_t c = 0; c < g.c; ++c) {
        const T* wrow = w + (offset + c) * o;
        T acc = T(0);
        for (std::size_t j = 0; j < o; ++j) {
          acc += dyb[row * o + j] * wrow[j];
          if (dw) dw[(offset + c) * o + j] += x[src + c] * dyb[row * o + j];
        }
        if (dx) dx[src + c] += acc;
      }
    });
  }
}

template <class T>
Tensor<T> conv_nd(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, const ConvOptions& opt,
                  std::size_t spatial) {
  const ConvGeometry g = conv_geometry(x.shape(), kernel.shape(), spatial, opt);
  if (bias.defined()) require(bias.size() == g.out_c, "conv bias must have one value per output channel");
  const Shape out_shape = conv_output_shape(g, spatial);
  std::vector<T> y(numel(out_shape));
  conv_forward(g, opt.algorithm, x.values().data(), kernel.values().data(),
               bias.defined() ? bias.values().data() : nullptr, y.data());
  std::vector<Tensor<T>> parents{x, kernel};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result<T>(out_shape, std::move(y), parents, [g, algo = opt.algorithm, has_bias](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    Node<T>& kn = *self.parents[1];
    Node<T>* bn = has_bias ? self.parents[2].get() : nullptr;
    conv_backward(g, algo, xn.value.data(), kn.value.data(), self.grad.data(),
                  xn.requires_grad ? xn.ensure_grad().data() : nullptr,
                  kn.requires_grad ? kn.ensure_grad().data() : nullptr,
                  bn && bn->requires_grad ? bn->ensure_grad().data() : nullptr);
  });
}

template <class T>
Tensor<T> elementwise(const Tensor<T>& x, T (*f)(T), T (*df_from_y)(T)) {
  std::vector<T> y(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_result<T>(x.shape(), std::move(y), {x}, [df_from_y](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    auto& dx = xn.ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * df_from_y(self.value[i]);
  });
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, const ConvOptions& opt) {
  return conv_nd(x, kernel, bias, opt, 2);
}

template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, const ConvOptions& opt) {
  return conv_nd(x, kernel, bias, opt, 3);
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(numel(shape) == x.size(), "reshape " + shape_string(x.shape()) + " -> " + shape_string(shape) +
                                        " changes the element count");
  std::vector<T> y(x.values().begin(), x.values().end());
  return make_result<T>(std::move(shape), std::move(y), {x}, [](Node<T>& self) {
    accumulate<T>(self.parents[0]->ensure_grad(), self.grad);
  });
}

template <class T>
Tensor<T> reshape_projection(const Tensor<T>& x) {
  const Shape& s = x.shape();
  require(s.size() == 4 || s.size() == 5,
          "reshape_projection needs (H, W, D, C) or (N, H, W, D, C), got " + shape_string(s));
  Shape out(s.begin(), s.end() - 2);
  out.push_back(s[s.size() - 2] * s.back());
  return reshape(x, std::move(out));
}

template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(x.rank() == 2 && weight.rank() == 2 && weight.dim(0) == x.dim(1),
          "dense shape mismatch: " + shape_string(x.shape()) + " x " + shape_string(weight.shape()));
  const std::size_t n = x.dim(0), in = x.dim(1), out = weight.dim(1);
  if (bias.defined()) require(bias.size() == out, "dense bias size mismatch");
  std::vector<T> y(n * out);
  MatrixMap<T> ym(y.data(), n, out);
  ym.noalias() = ConstMatrixMap<T>(x.values().data(), n, in) * ConstMatrixMap<T>(weight.values().data(), in, out);
  if (bias.defined())
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < out; ++j) ym(r, j) += bias.values()[j];
  std::vector<Tensor<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>({n, out}, std::move(y), parents, [n, in, out](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    Node<T>& wn = *self.parents[1];
    const ConstMatrixMap<T> dy(self.grad.data(), n, out);
    if (xn.requires_grad)
      MatrixMap<T>(xn.ensure_grad().data(), n, in).noalias() +=
          dy * ConstMatrixMap<T>(wn.value.data(), in, out).transpose();
    if (wn.requires_grad)
      MatrixMap<T>(wn.ensure_grad().data(), in, out).noalias() +=
          ConstMatrixMap<T>(xn.value.data(), n, in).transpose() * dy;
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      auto& db = self.parents[2]->ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < out; ++j) db[j] += dy(r, j);
    }
  });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return elementwise<T>(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T y) { return y > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return elementwise<T>(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                    const BatchNormOptions& opt) {
  require(x.rank() >= 2, "batchnorm needs a channel axis");
  const std::size_t c = x.shape().back();
  const std::size_t m = x.size() / c;
  require(gamma.size() == c && beta.size() == c && state.mean.size() == c && state.var.size() == c,
          "batchnorm parameter size mismatch for " + shape_string(x.shape()));
  const auto xv = x.values();
  std::vector<T> mean(c, T(0)), inv_std(c), xhat(x.size()), y(x.size());
  if (opt.training) {
    std::vector<double> acc(c, 0.0), acc2(c, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) acc[j] += xv[i * c + j];
    for (std::size_t j = 0; j < c; ++j) acc[j] /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xv[i * c + j] - acc[j];
        acc2[j] += d * d;
      }
    for (std::size_t j = 0; j < c; ++j) {
      const double var = acc2[j] / static_cast<double>(m);
      mean[j] = static_cast<T>(acc[j]);
      inv_std[j] = static_cast<T>(1.0 / std::sqrt(var + opt.eps));
      state.mean[j] = static_cast<T>(opt.momentum * state.mean[j] + (1.0 - opt.momentum) * acc[j]);
      state.var[j] = static_cast<T>(opt.momentum * state.var[j] + (1.0 - opt.momentum) * var);
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = state.mean[j];
      inv_std[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.var[j]) + opt.eps));
    }
  }
  const auto g = gamma.values(), b = beta.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = i * c + j;
      xhat[k] = (xv[k] - mean[j]) * inv_std[j];
      y[k] = g[j] * xhat[k] + b[j];
    }
  return make_result<T>(x.shape(), std::move(y), {x, gamma, beta},
                        [c, m, training = opt.training, inv_std = std::move(inv_std),
                         xhat = std::move(xhat)](Node<T>& self) {
                          Node<T>& xn = *self.parents[0];
                          Node<T>& gn = *self.parents[1];
                          Node<T>& bn = *self.parents[2];
                          const auto& dy = self.grad;
                          std::vector<T> sum_dy(c, T(0)), sum_dy_xhat(c, T(0));
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t j = 0; j < c; ++j) {
                              sum_dy[j] += dy[i * c + j];
                              sum_dy_xhat[j] += dy[i * c + j] * xhat[i * c + j];
                            }
                          if (gn.requires_grad) accumulate<T>(gn.ensure_grad(), sum_dy_xhat);
                          if (bn.requires_grad) accumulate<T>(bn.ensure_grad(), sum_dy);
                          if (!xn.requires_grad) return;
                          auto& dx = xn.ensure_grad();
                          const T inv_m = T(1) / static_cast<T>(m);
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t j = 0; j < c; ++j) {
                              const std::size_t k = i * c + j;
                              const T g = gn.value[j];
                              if (training) {
                                dx[k] += g * inv_std[j] * inv_m *
                                         (static_cast<T>(m) * dy[k] - sum_dy[j] - xhat[k] * sum_dy_xhat[j]);
                              } else {
                                dx[k] += g * inv_std[j] * dy[k];
                              }
                            }
                        });
}

template <class T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor) {
  require(x.rank() == 4, "upsample_nearest needs (N, H, W, C), got " + shape_string(x.shape()));
  require(factor >= 1, "upsample factor must be >= 1");
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3), f = static_cast<std::size_t>(factor);
  const std::size_t oh = h * f, ow = w * f;
  std::vector<T> y(n * oh * ow * c);
  const auto xv = x.values();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        std::memcpy(&y[((b * oh + i) * ow + j) * c], &xv[((b * h + i / f) * w + j / f) * c], c * sizeof(T));
  return make_result<T>({n, oh, ow, c}, std::move(y), {x}, [n, h, w, c, f](Node<T>& self) {
    auto& dx = self.parents[0]->ensure_grad();
    const std::size_t oh = h * f, ow = w * f;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
          for (std::size_t k = 0; k < c; ++k)
            dx[((b * h + i / f) * w + j / f) * c + k] += self.grad[((b * oh + i) * ow + j) * c + k];
  });
}

template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  require(x.rank() == 4 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0,
          "avg_pool2 needs (N, H, W, C) with even H and W, got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<T> y(n * oh * ow * c, T(0));
  const auto xv = x.values();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        for (std::size_t k = 0; k < c; ++k)
          y[((b * oh + i / 2) * ow + j / 2) * c + k] += T(0.25) * xv[((b * h + i) * w + j) * c + k];
  return make_result<T>({n, oh, ow, c}, std::move(y), {x}, [n, h, w, c](Node<T>& self) {
    auto& dx = self.parents[0]->ensure_grad();
    const std::size_t oh = h / 2, ow = w / 2;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
          for (std::size_t k = 0; k < c; ++k)
            dx[((b * h + i) * w + j) * c + k] += T(0.25) * self.grad[((b * oh + i / 2) * ow + j / 2) * c + k];
  });
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat of nothing");
  const Shape& s0 = parts[0].shape();
  const Shape lead(s0.begin(), s0.end() - 1);
  std::size_t total_c = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    require(s.size() == s0.size() && Shape(s.begin(), s.end() - 1) == lead,
            "concat leading axes differ: " + shape_string(s0) + " vs " + shape_string(s));
    widths.push_back(s.back());
    total_c += s.back();
  }
  const std::size_t m = numel(lead);
  std::vector<T> y(m * total_c);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    for (std::size_t i = 0; i < m; ++i)
      std::memcpy(&y[i * total_c + off], &v[i * widths[p]], widths[p] * sizeof(T));
    off += widths[p];
  }
  Shape out = lead;
  out.push_back(total_c);
  return make_result<T>(std::move(out), std::move(y), parts, [m, total_c, widths](Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      Node<T>& pn = *self.parents[p];
      if (pn.requires_grad) {
        auto& dx = pn.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t k = 0; k < widths[p]; ++k) dx[i * widths[p] + k] += self.grad[i * total_c + off + k];
      }
      off += widths[p];
    }
  });
}

template <class T>
Tensor<T> tile(const Tensor<T>& v, std::size_t height, std::size_t width) {
  require(v.rank() == 2, "tile needs (N, C), got " + shape_string(v.shape()));
  const std::size_t n = v.dim(0), c = v.dim(1), hw = height * width;
  std::vector<T> y(n * hw * c);
  const auto vv = v.values();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < hw; ++p) std::memcpy(&y[(b * hw + p) * c], &vv[b * c], c * sizeof(T));
  return make_result<T>({n, height, width, c}, std::move(y), {v}, [n, c, hw](Node<T>& self) {
    auto& dv = self.parents[0]->ensure_grad();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t k = 0; k < c; ++k) dv[b * c + k] += self.grad[(b * hw + p) * c + k];
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
  return make_result<T>(a.shape(), std::move(y), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) accumulate<T>(p->ensure_grad(), self.grad);
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = factor * a.values()[i];
  return make_result<T>(a.shape(), std::move(y), {a}, [factor](Node<T>& self) {
    auto& dx = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * self.grad[i];
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.values()) s += v;
  return make_result<T>({1}, {s}, {a}, [](Node<T>& self) {
    auto& dx = self.parents[0]->ensure_grad();
    for (auto& d : dx) d += self.grad[0];
  });
}

template <class T>
Tensor<T> weighted_sum(const Tensor<T>& a, std::span<const T> weights) {
  require(weights.size() == a.size(), "weighted_sum weight count mismatch");
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * weights[i];
  std::vector<T> w(weights.begin(), weights.end());
  return make_result<T>({1}, {s}, {a}, [w = std::move(w)](Node<T>& self) {
    auto& dx = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[0] * w[i];
  });
}

template <class T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "l1_loss shape mismatch: " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(static_cast<double>(a.values()[i]) - b.values()[i]);
  const T inv_n = T(1) / static_cast<T>(a.size());
  return make_result<T>({1}, {static_cast<T>(s / static_cast<double>(a.size()))}, {a, b}, [inv_n](Node<T>& self) {
    Node<T>& an = *self.parents[0];
    Node<T>& bn = *self.parents[1];
    const T g = self.grad[0] * inv_n;
    for (std::size_t i = 0; i < an.value.size(); ++i) {
      const T d = an.value[i] - bn.value[i];
      const T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (an.requires_grad) an.ensure_grad()[i] += g * sgn;
      if (bn.requires_grad) bn.ensure_grad()[i] -= g * sgn;
    }
  });
}

template <class T>
Tensor<T> l2_feature_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "l2_feature_loss shape mismatch: " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - b.values()[i];
    s += d * d;
  }
  const double n = static_cast<double>(a.size());
  const T value = static_cast<T>(std::sqrt(s / n));
  return make_result<T>({1}, {value}, {a, b}, [n](Node<T>& self) {
    const T rms = self.value[0];
    if (rms == T(0)) return;
    Node<T>& an = *self.parents[0];
    Node<T>& bn = *self.parents[1];
    const T g = self.grad[0] / (static_cast<T>(n) * rms);
    for (std::size_t i = 0; i < an.value.size(); ++i) {
      const T d = an.value[i] - bn.value[i];
      if (an.requires_grad) an.ensure_grad()[i] += g * d;
      if (bn.requires_grad) bn.ensure_grad()[i] -= g * d;
    }
  });
}

#define VOXELCAST_INSTANTIATE_OPS(T)                                                                        \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvOptions&);     \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvOptions&);     \
  template Tensor<T> reshape_projection(const Tensor<T>&);                                                 \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                     \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> relu(const Tensor<T>&);                                                               \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                            \
  template Tensor<T> batchnorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormState<T>&,   \
                               const BatchNormOptions&);                                                   \
  template Tensor<T> upsample_nearest(const Tensor<T>&, int);                                              \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                                          \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                                                \
  template Tensor<T> tile(const Tensor<T>&, std::size_t, std::size_t);                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                                           \
  template Tensor<T> sum(const Tensor<T>&);                                                                \
  template Tensor<T> weighted_sum(const Tensor<T>&, std::span<const T>);                                   \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> l2_feature_loss(const Tensor<T>&, const Tensor<T>&);

VOXELCAST_INSTANTIATE_OPS(float)
VOXELCAST_INSTANTIATE_OPS(double)

}  // namespace voxelcast::ad
