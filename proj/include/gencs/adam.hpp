#pragma once

#include <gencs/types.hpp>

#include <cmath>

namespace gencs {

struct AdamParams {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second-moment state for one parameter block, with the standard
/// bias-corrected update. The same stepper drives recovery and training.
class AdamState {
public:
  explicit AdamState(Index n) : m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  void step(Eigen::Ref<Vector> x, const Eigen::Ref<const Vector>& grad, const AdamParams& params) {
    if (grad.size() != m_.size() || x.size() != m_.size())
      throw ShapeError("AdamState: size mismatch");
    ++t_;
    m_ = params.beta1 * m_ + (1.0 - params.beta1) * grad;
    v_ = params.beta2 * v_ + (1.0 - params.beta2) * grad.cwiseProduct(grad);
    const double mc = 1.0 - std::pow(params.beta1, static_cast<double>(t_));
    const double vc = 1.0 - std::pow(params.beta2, static_cast<double>(t_));
    x -= params.learning_rate * (m_ / mc).cwiseQuotient(((v_ / vc).cwiseSqrt().array() + params.eps).matrix());
  }

  long steps_taken() const { return t_; }

private:
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace gencs
