#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "gradibd/diff_core.hpp"
#include "gradibd/error.hpp"

namespace gradibd::testing {

/// Builds a scalar loss on `tape` from leaf variables holding `inputs`.
using LossFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over every
/// input entry, with central differences.
inline double max_grad_error(const LossFn& fn, std::vector<ad::Matrix> inputs, double step = 1e-5) {
  std::vector<ad::Matrix> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.variable(m));
    ad::backward(fn(tape, vars));
    for (const auto& v : vars) analytic.push_back(v.grad());
  }
  auto eval = [&] {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.constant(m));
    return fn(tape, vars).scalar();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      double& x = inputs[k].data()[i];
      const double saved = x;
      x = saved + step;
      const double up = eval();
      x = saved - step;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic[k].data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8}));
    }
  }
  return worst;
}

template <typename Fn>
ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a gradibd::Error";
  return ErrorCode::InvariantViolation;
}

}  // namespace gradibd::testing
