#pragma once

#include <xrdseg/common.hpp>
#include <xrdseg/tensor.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace xrdseg {

// Integer class map aligned to a (N, H, W) batch of label images.
struct LabelMap {
  Index n = 0, h = 0, w = 0;
  std::vector<std::uint8_t> values;

  Index numel() const { return n * h * w; }
  std::uint8_t operator()(Index in, Index ih, Index iw) const {
    return values[(in * h + ih) * w + iw];
  }
  std::uint8_t& at(Index in, Index ih, Index iw) {
    return values[(in * h + ih) * w + iw];
  }
  static LabelMap zeros(Index n, Index h, Index w) {
    LabelMap m;
    m.n = n;
    m.h = h;
    m.w = w;
    m.values.assign(static_cast<std::size_t>(n * h * w), 0);
    return m;
  }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

namespace detail {

// im2col patch matrix: row k = (ci, i, j) in row-major kernel order, one
// column per output pixel. The fixed row order is what pins the conv2d
// accumulation order (see conv2d below).
template <typename Scalar>
void fill_patches(const Scalar* x, Index cin, Index h, Index w, Index kh,
                  Index kw, Index stride, Index pad, Index oh, Index ow,
                  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& patches) {
  patches.resize(cin * kh * kw, oh * ow);
  for (Index ci = 0; ci < cin; ++ci) {
    const Scalar* plane = x + ci * h * w;
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        Scalar* row = patches.data() + ((ci * kh + i) * kw + j) * oh * ow;
        for (Index r = 0; r < oh; ++r) {
          const Index ih = r * stride + i - pad;
          Scalar* dst = row + r * ow;
          if (ih < 0 || ih >= h) {
            for (Index c = 0; c < ow; ++c) dst[c] = Scalar(0);
            continue;
          }
          const Scalar* src = plane + ih * w;
          for (Index c = 0; c < ow; ++c) {
            const Index iw = c * stride + j - pad;
            dst[c] = (iw >= 0 && iw < w) ? src[iw] : Scalar(0);
          }
        }
      }
    }
  }
}

// Adjoint of fill_patches: scatter-add columns back into the image.
template <typename Scalar>
void scatter_patches(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& cols,
                     Index cin, Index h, Index w, Index kh, Index kw,
                     Index stride, Index pad, Index oh, Index ow, Scalar* gx) {
  for (Index ci = 0; ci < cin; ++ci) {
    Scalar* plane = gx + ci * h * w;
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const Index k = (ci * kh + i) * kw + j;
        for (Index r = 0; r < oh; ++r) {
          const Index ih = r * stride + i - pad;
          if (ih < 0 || ih >= h) continue;
          for (Index c = 0; c < ow; ++c) {
            const Index iw = c * stride + j - pad;
            if (iw < 0 || iw >= w) continue;
            plane[ih * w + iw] += cols(k, r * ow + c);
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2-D convolution, zero padding. Output pixel accumulation order is fixed:
// bias first, then kernel taps in row-major (ci, i, j) order, so results are
// reproducible and match a plain nested-loop evaluation bit for bit.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias, Index stride = 1, Index padding = 0) {
  using T = Tensor<Scalar>;
  using ArrayXX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Shape4 xs = input.shape();
  const Shape4 ws = weight.shape();  // (cout, cin, kh, kw)
  if (ws.c != xs.c) {
    throw DataError("conv2d: weight Cin=" + std::to_string(ws.c) +
                    " does not match input C=" + std::to_string(xs.c));
  }
  if (bias.shape() != Shape4{1, ws.n, 1, 1}) {
    throw DataError("conv2d: bias shape " + bias.shape().str() +
                    " does not match Cout=" + std::to_string(ws.n));
  }
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
  if (ws.h > xs.h + 2 * padding || ws.w > xs.w + 2 * padding) {
    throw DataError("conv2d: kernel " + std::to_string(ws.h) + "x" +
                    std::to_string(ws.w) + " exceeds padded input " +
                    std::to_string(xs.h + 2 * padding) + "x" +
                    std::to_string(xs.w + 2 * padding));
  }

  const Index oh = (xs.h + 2 * padding - ws.h) / stride + 1;
  const Index ow = (xs.w + 2 * padding - ws.w) / stride + 1;
  const Index npix = oh * ow;
  const Index kdim = ws.c * ws.h * ws.w;
  const Shape4 out_shape{xs.n, ws.n, oh, ow};

  typename T::Storage out(out_shape.numel());
  ArrayXX patches;
  const Scalar* wdat = weight.values().data();
  const Scalar* bdat = bias.values().data();
  for (Index n = 0; n < xs.n; ++n) {
    detail::fill_patches(input.values().data() + n * xs.c * xs.h * xs.w, xs.c,
                         xs.h, xs.w, ws.h, ws.w, stride, padding, oh, ow, patches);
    for (Index o = 0; o < ws.n; ++o) {
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> orow(
          out.data() + (n * ws.n + o) * npix, npix);
      orow.setConstant(bdat[o]);
      for (Index k = 0; k < kdim; ++k) {
        orow += wdat[o * kdim + k] * patches.row(k).transpose();
      }
    }
  }

  auto xn = input.node();
  auto wn = weight.node();
  auto bn = bias.node();
  auto backprop = [xn, wn, bn, xs, ws, stride, padding, oh, ow,
                   kdim](typename T::Node& node) {
    using MatrixXX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Index npix = oh * ow;
    ArrayXX patches;
    for (Index n = 0; n < xs.n; ++n) {
      Eigen::Map<const RowMat> gy(node.grad.data() + n * ws.n * npix, ws.n, npix);
      const bool need_patches = wn->requires_grad || xn->requires_grad;
      if (need_patches) {
        detail::fill_patches(xn->data.data() + n * xs.c * xs.h * xs.w, xs.c,
                             xs.h, xs.w, ws.h, ws.w, stride, padding, oh, ow,
                             patches);
      }
      if (bn->requires_grad) {
        auto& gb = T::grad_of(*bn);
        for (Index o = 0; o < ws.n; ++o) gb[o] += gy.row(o).sum();
      }
      if (wn->requires_grad) {
        Eigen::Map<RowMat> gw(T::grad_of(*wn).data(), ws.n, kdim);
        Eigen::Map<const RowMat> pm(patches.data(), kdim, npix);
        gw.noalias() += gy * pm.transpose();
      }
      if (xn->requires_grad) {
        Eigen::Map<const RowMat> pm(patches.data(), kdim, npix);
        Eigen::Map<const RowMat> wm(wn->data.data(), ws.n, kdim);
        MatrixXX gcols = wm.transpose() * gy;
        detail::scatter_patches<Scalar>(gcols, xs.c, xs.h, xs.w, ws.h, ws.w,
                                        stride, padding, oh, ow,
                                        T::grad_of(*xn).data() + n * xs.c * xs.h * xs.w);
      }
    }
  };
  return T::make_op(out_shape, std::move(out), {xn, wn, bn}, backprop);
}

// Transposed convolution with a 2x2 kernel and stride 2 (the only shape the
// decoder uses); doubles both spatial extents. Weight layout (cin, cout, 2, 2).
template <typename Scalar>
Tensor<Scalar> conv2d_transposed(const Tensor<Scalar>& input,
                                 const Tensor<Scalar>& weight,
                                 const Tensor<Scalar>& bias) {
  using T = Tensor<Scalar>;
  const Shape4 xs = input.shape();
  const Shape4 ws = weight.shape();  // (cin, cout, kh, kw)
  if (ws.n != xs.c) {
    throw DataError("conv2d_transposed: weight Cin=" + std::to_string(ws.n) +
                    " does not match input C=" + std::to_string(xs.c));
  }
  if (ws.h != 2 || ws.w != 2) {
    throw ConfigError("conv2d_transposed: only 2x2 kernels are supported");
  }
  if (bias.shape() != Shape4{1, ws.c, 1, 1}) {
    throw DataError("conv2d_transposed: bias shape " + bias.shape().str() +
                    " does not match Cout=" + std::to_string(ws.c));
  }
  const Index cout = ws.c;
  const Shape4 out_shape{xs.n, cout, 2 * xs.h, 2 * xs.w};
  typename T::Storage out(out_shape.numel());

  const Scalar* xdat = input.values().data();
  const Scalar* wdat = weight.values().data();
  const Scalar* bdat = bias.values().data();
  const Index oh = 2 * xs.h, ow = 2 * xs.w;
  for (Index n = 0; n < xs.n; ++n) {
    for (Index co = 0; co < cout; ++co) {
      Scalar* oplane = out.data() + (n * cout + co) * oh * ow;
      for (Index p = 0; p < oh * ow; ++p) oplane[p] = bdat[co];
      for (Index ci = 0; ci < xs.c; ++ci) {
        const Scalar* xplane = xdat + (n * xs.c + ci) * xs.h * xs.w;
        const Scalar* wk = wdat + (ci * cout + co) * 4;
        for (Index h = 0; h < xs.h; ++h) {
          for (Index w = 0; w < xs.w; ++w) {
            const Scalar v = xplane[h * xs.w + w];
            Scalar* o00 = oplane + (2 * h) * ow + 2 * w;
            o00[0] += v * wk[0];
            o00[1] += v * wk[1];
            o00[ow] += v * wk[2];
            o00[ow + 1] += v * wk[3];
          }
        }
      }
    }
  }

  auto xn = input.node();
  auto wn = weight.node();
  auto bn = bias.node();
  auto backprop = [xn, wn, bn, xs, cout](typename T::Node& node) {
    const Index oh = 2 * xs.h, ow = 2 * xs.w;
    for (Index n = 0; n < xs.n; ++n) {
      for (Index co = 0; co < cout; ++co) {
        const Scalar* gplane = node.grad.data() + (n * cout + co) * oh * ow;
        if (bn->requires_grad) {
          Scalar s = 0;
          for (Index p = 0; p < oh * ow; ++p) s += gplane[p];
          T::grad_of(*bn)[co] += s;
        }
        for (Index ci = 0; ci < xs.c; ++ci) {
          const Scalar* xplane = xn->data.data() + (n * xs.c + ci) * xs.h * xs.w;
          const Scalar* wk = wn->data.data() + (ci * cout + co) * 4;
          Scalar* gw = wn->requires_grad ? T::grad_of(*wn).data() + (ci * cout + co) * 4 : nullptr;
          Scalar* gx = xn->requires_grad ? T::grad_of(*xn).data() + (n * xs.c + ci) * xs.h * xs.w : nullptr;
          for (Index h = 0; h < xs.h; ++h) {
            for (Index w = 0; w < xs.w; ++w) {
              const Scalar* g00 = gplane + (2 * h) * ow + 2 * w;
              if (gw) {
                const Scalar v = xplane[h * xs.w + w];
                gw[0] += v * g00[0];
                gw[1] += v * g00[1];
                gw[2] += v * g00[ow];
                gw[3] += v * g00[ow + 1];
              }
              if (gx) {
                gx[h * xs.w + w] += wk[0] * g00[0] + wk[1] * g00[1] +
                                    wk[2] * g00[ow] + wk[3] * g00[ow + 1];
              }
            }
          }
        }
      }
    }
  };
  return T::make_op(out_shape, std::move(out), {xn, wn, bn}, backprop);
}

// 2x2 max pooling, stride 2. Ties resolve to the first element in row-major
// window scan order; backward routes the gradient to that element only.
template <typename Scalar>
Tensor<Scalar> maxpool2(const Tensor<Scalar>& input) {
  using T = Tensor<Scalar>;
  const Shape4 xs = input.shape();
  if (xs.h % 2 != 0 || xs.w % 2 != 0) {
    throw DataError("maxpool2: spatial dims must be even, got " +
                    std::to_string(xs.h) + "x" + std::to_string(xs.w));
  }
  const Shape4 out_shape{xs.n, xs.c, xs.h / 2, xs.w / 2};
  typename T::Storage out(out_shape.numel());
  auto argmax = std::make_shared<std::vector<Index>>(out_shape.numel());

  const Scalar* x = input.values().data();
  Index oi = 0;
  for (Index nc = 0; nc < xs.n * xs.c; ++nc) {
    const Index base = nc * xs.h * xs.w;
    for (Index h = 0; h < xs.h; h += 2) {
      for (Index w = 0; w < xs.w; w += 2) {
        const Index i00 = base + h * xs.w + w;
        Index best = i00;
        if (x[i00 + 1] > x[best]) best = i00 + 1;
        if (x[i00 + xs.w] > x[best]) best = i00 + xs.w;
        if (x[i00 + xs.w + 1] > x[best]) best = i00 + xs.w + 1;
        out[oi] = x[best];
        (*argmax)[oi] = best;
        ++oi;
      }
    }
  }

  auto xn = input.node();
  auto backprop = [xn, argmax](typename T::Node& node) {
    if (!xn->requires_grad) return;
    auto& gx = T::grad_of(*xn);
    for (Index i = 0; i < node.grad.size(); ++i) {
      gx[(*argmax)[i]] += node.grad[i];
    }
  };
  return T::make_op(out_shape, std::move(out), {xn}, backprop);
}

// Per-channel batch normalization with affine transform. Train mode uses
// batch statistics over (N, H, W) and updates the running buffers in place;
// eval mode normalizes with the running statistics.
template <typename Scalar>
Tensor<Scalar> batchnorm2d(const Tensor<Scalar>& input, const Tensor<Scalar>& gamma,
                           const Tensor<Scalar>& beta,
                           Eigen::Array<Scalar, Eigen::Dynamic, 1>& running_mean,
                           Eigen::Array<Scalar, Eigen::Dynamic, 1>& running_var,
                           bool train,
                           double momentum = kBatchNormMomentum,
                           double eps = kBatchNormEps) {
  using T = Tensor<Scalar>;
  using Storage = typename T::Storage;
  const Shape4 xs = input.shape();
  if (gamma.shape() != Shape4{1, xs.c, 1, 1} || beta.shape() != Shape4{1, xs.c, 1, 1}) {
    throw DataError("batchnorm2d: affine parameter shape does not match C=" +
                    std::to_string(xs.c));
  }
  if (running_mean.size() != xs.c || running_var.size() != xs.c) {
    throw DataError("batchnorm2d: running stats size does not match C=" +
                    std::to_string(xs.c));
  }
  const Index cnt = xs.n * xs.h * xs.w;
  if (train && cnt < 2) {
    throw DataError("batchnorm2d: train mode needs N*H*W >= 2, got " +
                    std::to_string(cnt));
  }

  const Index plane = xs.h * xs.w;
  auto mean = std::make_shared<Storage>(xs.c);
  auto inv_std = std::make_shared<Storage>(xs.c);
  const Scalar* x = input.values().data();
  if (train) {
    for (Index c = 0; c < xs.c; ++c) {
      Scalar sum = 0;
      for (Index n = 0; n < xs.n; ++n) {
        Eigen::Map<const Storage> blk(x + (n * xs.c + c) * plane, plane);
        sum += blk.sum();
      }
      const Scalar m = sum / Scalar(cnt);
      Scalar sq = 0;
      for (Index n = 0; n < xs.n; ++n) {
        Eigen::Map<const Storage> blk(x + (n * xs.c + c) * plane, plane);
        sq += (blk - m).square().sum();
      }
      const Scalar var = sq / Scalar(cnt);
      (*mean)[c] = m;
      (*inv_std)[c] = Scalar(1) / std::sqrt(var + Scalar(eps));
      running_mean[c] = Scalar(1 - momentum) * running_mean[c] + Scalar(momentum) * m;
      const Scalar var_unbiased = sq / Scalar(cnt - 1);
      running_var[c] = Scalar(1 - momentum) * running_var[c] + Scalar(momentum) * var_unbiased;
    }
  } else {
    for (Index c = 0; c < xs.c; ++c) {
      (*mean)[c] = running_mean[c];
      (*inv_std)[c] = Scalar(1) / std::sqrt(running_var[c] + Scalar(eps));
    }
  }

  typename T::Storage out(xs.numel());
  const Scalar* g = gamma.values().data();
  const Scalar* b = beta.values().data();
  for (Index n = 0; n < xs.n; ++n) {
    for (Index c = 0; c < xs.c; ++c) {
      Eigen::Map<const Storage> xin(x + (n * xs.c + c) * plane, plane);
      Eigen::Map<Storage> yout(out.data() + (n * xs.c + c) * plane, plane);
      yout = (xin - (*mean)[c]) * (*inv_std)[c] * g[c] + b[c];
    }
  }

  auto xn = input.node();
  auto gn = gamma.node();
  auto btn = beta.node();
  auto backprop = [xn, gn, btn, xs, plane, cnt, mean, inv_std,
                   train](typename T::Node& node) {
    for (Index c = 0; c < xs.c; ++c) {
      Scalar s1 = 0, s2 = 0;  // sum(gy), sum(gy * xhat)
      for (Index n = 0; n < xs.n; ++n) {
        Eigen::Map<const Storage> gy(node.grad.data() + (n * xs.c + c) * plane, plane);
        Eigen::Map<const Storage> xin(xn->data.data() + (n * xs.c + c) * plane, plane);
        s1 += gy.sum();
        s2 += (gy * (xin - (*mean)[c]) * (*inv_std)[c]).sum();
      }
      if (gn->requires_grad) T::grad_of(*gn)[c] += s2;
      if (btn->requires_grad) T::grad_of(*btn)[c] += s1;
      if (!xn->requires_grad) continue;
      const Scalar gc = gn->data[c];
      const Scalar is = (*inv_std)[c];
      for (Index n = 0; n < xs.n; ++n) {
        Eigen::Map<const Storage> gy(node.grad.data() + (n * xs.c + c) * plane, plane);
        Eigen::Map<const Storage> xin(xn->data.data() + (n * xs.c + c) * plane, plane);
        Eigen::Map<Storage> gx(T::grad_of(*xn).data() + (n * xs.c + c) * plane, plane);
        if (train) {
          gx += gc * is *
                (gy - s1 / Scalar(cnt) -
                 (xin - (*mean)[c]) * is * (s2 / Scalar(cnt)));
        } else {
          gx += gc * is * gy;
        }
      }
    }
  };
  return T::make_op(xs, std::move(out), {xn, gn, btn}, backprop);
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  using T = Tensor<Scalar>;
  typename T::Storage out = input.values().max(Scalar(0));
  auto xn = input.node();
  auto backprop = [xn](typename T::Node& node) {
    if (!xn->requires_grad) return;
    T::grad_of(*xn) += node.grad * (xn->data > Scalar(0)).template cast<Scalar>();
  };
  return T::make_op(input.shape(), std::move(out), {xn}, backprop);
}

// Mean per-pixel cross entropy of two-class logits against {0,1} labels,
// stabilized by max subtraction. Returns a scalar-shaped tensor.
template <typename Scalar>
Tensor<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, const LabelMap& labels) {
  using T = Tensor<Scalar>;
  const Shape4 ls = logits.shape();
  if (ls.c != 2) {
    throw DataError("softmax_cross_entropy: expected 2 logit channels, got " +
                    std::to_string(ls.c));
  }
  if (labels.n != ls.n || labels.h != ls.h || labels.w != ls.w) {
    throw DataError("softmax_cross_entropy: label map shape mismatch");
  }
  const Index plane = ls.h * ls.w;
  const Index count = ls.n * plane;
  auto prob1 = std::make_shared<typename T::Storage>(count);

  const Scalar* x = logits.values().data();
  double loss = 0;
  for (Index n = 0; n < ls.n; ++n) {
    const Scalar* l0 = x + (n * 2 + 0) * plane;
    const Scalar* l1 = x + (n * 2 + 1) * plane;
    for (Index p = 0; p < plane; ++p) {
      const std::uint8_t lab = labels.values[n * plane + p];
      if (lab > 1) {
        throw DataError("softmax_cross_entropy: label " + std::to_string(int(lab)) +
                        " outside {0,1} at pixel " + std::to_string(n * plane + p));
      }
      const Scalar m = l0[p] > l1[p] ? l0[p] : l1[p];
      const Scalar e0 = std::exp(l0[p] - m);
      const Scalar e1 = std::exp(l1[p] - m);
      const Scalar z = e0 + e1;
      (*prob1)[n * plane + p] = e1 / z;
      const Scalar llab = lab ? l1[p] : l0[p];
      loss -= double(llab - m - std::log(z));
    }
  }
  typename T::Storage out(1);
  out[0] = Scalar(loss / double(count));
  if (!std::isfinite(double(out[0]))) {
    throw NumericError("softmax_cross_entropy: non-finite loss");
  }

  auto xn = logits.node();
  auto labs = std::make_shared<std::vector<std::uint8_t>>(labels.values);
  auto backprop = [xn, prob1, labs, ls, plane, count](typename T::Node& node) {
    if (!xn->requires_grad) return;
    const Scalar g = node.grad[0] / Scalar(count);
    auto& gx = T::grad_of(*xn);
    for (Index n = 0; n < ls.n; ++n) {
      Scalar* g0 = gx.data() + (n * 2 + 0) * plane;
      Scalar* g1 = gx.data() + (n * 2 + 1) * plane;
      for (Index p = 0; p < plane; ++p) {
        const Scalar p1 = (*prob1)[n * plane + p];
        const Scalar t1 = Scalar((*labs)[n * plane + p]);
        g1[p] += (p1 - t1) * g;
        g0[p] += ((Scalar(1) - p1) - (Scalar(1) - t1)) * g;
      }
    }
  };
  return T::make_op(Shape4{1, 1, 1, 1}, std::move(out), {xn}, backprop);
}

// Channel-wise concatenation (the skip connections).
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using T = Tensor<Scalar>;
  const Shape4 as = a.shape(), bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw DataError("concat_channels: shapes " + as.str() + " and " + bs.str() +
                    " differ outside the channel dim");
  }
  const Shape4 out_shape{as.n, as.c + bs.c, as.h, as.w};
  typename T::Storage out(out_shape.numel());
  const Index plane = as.h * as.w;
  for (Index n = 0; n < as.n; ++n) {
    std::copy_n(a.values().data() + n * as.c * plane, as.c * plane,
                out.data() + n * (as.c + bs.c) * plane);
    std::copy_n(b.values().data() + n * bs.c * plane, bs.c * plane,
                out.data() + (n * (as.c + bs.c) + as.c) * plane);
  }
  auto an = a.node();
  auto bn = b.node();
  auto backprop = [an, bn, as, bs, plane](typename T::Node& node) {
    const Index cc = as.c + bs.c;
    for (Index n = 0; n < as.n; ++n) {
      if (an->requires_grad) {
        Eigen::Map<typename T::Storage>(T::grad_of(*an).data() + n * as.c * plane,
                                        as.c * plane) +=
            Eigen::Map<const typename T::Storage>(node.grad.data() + n * cc * plane,
                                                  as.c * plane);
      }
      if (bn->requires_grad) {
        Eigen::Map<typename T::Storage>(T::grad_of(*bn).data() + n * bs.c * plane,
                                        bs.c * plane) +=
            Eigen::Map<const typename T::Storage>(
                node.grad.data() + (n * cc + as.c) * plane, bs.c * plane);
      }
    }
  };
  return T::make_op(out_shape, std::move(out), {an, bn}, backprop);
}

// Per-pixel argmax over the class channel; ties go to the lower class index.
template <typename Scalar>
LabelMap argmax_classes(const Tensor<Scalar>& logits) {
  const Shape4 ls = logits.shape();
  LabelMap out = LabelMap::zeros(ls.n, ls.h, ls.w);
  const Index plane = ls.h * ls.w;
  const Scalar* x = logits.values().data();
  for (Index n = 0; n < ls.n; ++n) {
    for (Index p = 0; p < plane; ++p) {
      Scalar best = x[(n * ls.c) * plane + p];
      std::uint8_t arg = 0;
      for (Index c = 1; c < ls.c; ++c) {
        const Scalar v = x[(n * ls.c + c) * plane + p];
        if (v > best) {
          best = v;
          arg = static_cast<std::uint8_t>(c);
        }
      }
      out.values[n * plane + p] = arg;
    }
  }
  return out;
}

}  // namespace xrdseg
