#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rcd/autodiff.hpp"

namespace rcd {

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct TensorError {
  std::string name;
  double max_rel_error;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<TensorError> per_tensor;
};

// Builds a scalar loss on the given tape. Parameters must be bound with
// Tape::param so their gradients can be read back.
using LossBuilder = std::function<Var(Tape&)>;

// Compares reverse-mode gradients with central differences
// (f(x+h) - f(x-h)) / 2h entry by entry. The error of one entry is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check(const LossBuilder& f, const std::vector<NamedTensor>& params,
                           double h = 1e-5);

}  // namespace rcd
