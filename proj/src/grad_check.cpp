#include "rcd/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace rcd {

namespace {
double evaluate(const LossBuilder& f) {
  Tape tape;
  return f(tape).value()(0, 0);
}
}  // namespace

GradCheckResult grad_check(const LossBuilder& f, const std::vector<NamedTensor>& params,
                           double h) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
    for (const auto& p : params) analytic.push_back(tape.grad(*p.tensor));
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& t = *params[k].tensor;
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + h;
      const double up = evaluate(f);
      t[i] = saved - h;
      const double down = evaluate(f);
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
    result.per_tensor.push_back({params[k].name, worst});
    result.max_rel_error = std::max(result.max_rel_error, worst);
  }
  return result;
}

}  // namespace rcd
