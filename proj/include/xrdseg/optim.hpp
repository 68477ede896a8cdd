#pragma once

#include <xrdseg/common.hpp>
#include <xrdseg/tensor.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace xrdseg {

// ADAM optimizer state for an ordered parameter list. First/second moment
// buffers are kept per parameter and must stay aligned with the list the
// state was created from.
template <typename Scalar>
struct AdamState {
  using Storage = typename Tensor<Scalar>::Storage;

  long step_count = 0;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Storage> m;
  std::vector<Storage> v;

  static AdamState create(const std::vector<Tensor<Scalar>>& params, double lr = 1e-2,
                          double beta1 = 0.9, double beta2 = 0.999,
                          double epsilon = 1e-8) {
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
      s.m.push_back(Storage::Zero(p.numel()));
      s.v.push_back(Storage::Zero(p.numel()));
    }
    return s;
  }
};

// One bias-corrected ADAM update over all parameters. Parameters without an
// accumulated gradient (never touched by the tape) are treated as zero-grad.
template <typename Scalar>
void adam_step(std::vector<Tensor<Scalar>>& params, AdamState<Scalar>& state) {
  if (params.size() != state.m.size()) {
    throw DataError("adam_step: state tracks " + std::to_string(state.m.size()) +
                    " parameters, got " + std::to_string(params.size()));
  }
  state.step_count += 1;
  const Scalar b1 = Scalar(state.beta1);
  const Scalar b2 = Scalar(state.beta2);
  const Scalar bc1 = Scalar(1) - std::pow(b1, Scalar(state.step_count));
  const Scalar bc2 = Scalar(1) - std::pow(b2, Scalar(state.step_count));
  const Scalar lr = Scalar(state.lr);
  const Scalar eps = Scalar(state.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.numel() != state.m[i].size()) {
      throw DataError("adam_step: parameter " + std::to_string(i) +
                      " shape changed under the optimizer");
    }
    if (!p.has_grad()) continue;
    const auto& g = p.grad();
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * g.square();
    p.mutable_values() -=
        lr * (state.m[i] / bc1) / ((state.v[i] / bc2).sqrt() + eps);
  }
}

}  // namespace xrdseg
