#pragma once

// Independent reference implementations the unit and acceptance tests check
// the library against. These stay deliberately naive (plain nested loops,
// central finite differences) and never call into the code paths they verify.

#include <xrdseg/nn.hpp>
#include <xrdseg/rng.hpp>
#include <xrdseg/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

namespace oracle {

using xrdseg::Index;
using xrdseg::Shape4;

// Plain quadruple-loop convolution. Accumulation starts from the bias and
// walks kernel taps in row-major (ci, i, j) order, matching the documented
// conv2d contract so float comparisons can be exact.
template <typename Scalar>
typename xrdseg::Tensor<Scalar>::Storage naive_conv2d(
    const xrdseg::Tensor<Scalar>& input, const xrdseg::Tensor<Scalar>& weight,
    const xrdseg::Tensor<Scalar>& bias, Index stride, Index padding) {
  const Shape4 xs = input.shape();
  const Shape4 ws = weight.shape();
  const Index oh = (xs.h + 2 * padding - ws.h) / stride + 1;
  const Index ow = (xs.w + 2 * padding - ws.w) / stride + 1;
  typename xrdseg::Tensor<Scalar>::Storage out(xs.n * ws.n * oh * ow);
  Index pos = 0;
  for (Index n = 0; n < xs.n; ++n) {
    for (Index o = 0; o < ws.n; ++o) {
      for (Index r = 0; r < oh; ++r) {
        for (Index c = 0; c < ow; ++c) {
          Scalar acc = bias(0, o, 0, 0);
          for (Index ci = 0; ci < ws.c; ++ci) {
            for (Index i = 0; i < ws.h; ++i) {
              for (Index j = 0; j < ws.w; ++j) {
                const Index ih = r * stride + i - padding;
                const Index iw = c * stride + j - padding;
                if (ih < 0 || ih >= xs.h || iw < 0 || iw >= xs.w) continue;
                acc += input(n, ci, ih, iw) * weight(o, ci, i, j);
              }
            }
          }
          out[pos++] = acc;
        }
      }
    }
  }
  return out;
}

// Scatter-style reference for the 2x2 stride-2 transposed convolution.
template <typename Scalar>
typename xrdseg::Tensor<Scalar>::Storage naive_conv2d_transposed(
    const xrdseg::Tensor<Scalar>& input, const xrdseg::Tensor<Scalar>& weight,
    const xrdseg::Tensor<Scalar>& bias) {
  const Shape4 xs = input.shape();
  const Index cout = weight.shape().c;
  const Index oh = 2 * xs.h, ow = 2 * xs.w;
  typename xrdseg::Tensor<Scalar>::Storage out(xs.n * cout * oh * ow);
  for (Index n = 0; n < xs.n; ++n) {
    for (Index co = 0; co < cout; ++co) {
      for (Index p = 0; p < oh * ow; ++p) {
        out[(n * cout + co) * oh * ow + p] = bias(0, co, 0, 0);
      }
    }
    for (Index ci = 0; ci < xs.c; ++ci) {
      for (Index co = 0; co < cout; ++co) {
        for (Index h = 0; h < xs.h; ++h) {
          for (Index w = 0; w < xs.w; ++w) {
            for (Index i = 0; i < 2; ++i) {
              for (Index j = 0; j < 2; ++j) {
                out[((n * cout + co) * oh + 2 * h + i) * ow + 2 * w + j] +=
                    input(n, ci, h, w) * weight(ci, co, i, j);
              }
            }
          }
        }
      }
    }
  }
  return out;
}

inline void randomize(xrdseg::TensorD& t, xrdseg::Rng& rng, double lo = -1.0,
                      double hi = 1.0) {
  auto& v = t.mutable_values();
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo, hi);
}

// Scalar objective sum(w .* y) with fixed random weights; probes every output
// element of the op under test during gradient checks.
inline xrdseg::TensorD weighted_sum(const xrdseg::TensorD& y,
                                    const Eigen::ArrayXd& w) {
  using T = xrdseg::TensorD;
  typename T::Storage out(1);
  out[0] = (y.values() * w).sum();
  auto yn = y.node();
  auto weights = std::make_shared<Eigen::ArrayXd>(w);
  return T::make_op(Shape4{1, 1, 1, 1}, std::move(out), {yn},
                    [yn, weights](typename T::Node& node) {
                      T::grad_of(*yn) += node.grad[0] * (*weights);
                    });
}

struct GradCheck {
  double max_rel = 0.0;
  Index worst_index = -1;
};

// Central finite differences on one leaf tensor against its accumulated
// analytic gradient. `forward` must re-evaluate the scalar objective from the
// leaf's current values.
inline GradCheck finite_difference(xrdseg::TensorD& leaf,
                                   const std::function<double()>& forward,
                                   double h = 1e-5) {
  GradCheck res;
  if (!leaf.has_grad()) {
    res.max_rel = std::numeric_limits<double>::infinity();
    return res;
  }
  const Eigen::ArrayXd analytic = leaf.grad();
  auto& v = leaf.mutable_values();
  for (Index i = 0; i < v.size(); ++i) {
    const double save = v[i];
    v[i] = save + h;
    const double fp = forward();
    v[i] = save - h;
    const double fm = forward();
    v[i] = save;
    const double fd = (fp - fm) / (2.0 * h);
    const double rel = std::abs(analytic[i] - fd) /
                       std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
    if (rel > res.max_rel) {
      res.max_rel = rel;
      res.worst_index = i;
    }
  }
  return res;
}

}  // namespace oracle
