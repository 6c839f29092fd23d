#pragma once

#include "common.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace moco5d {

/// Adaptive-moment gradient descent on a flat real parameter vector.
class Adam
{
public:
  explicit Adam(size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
    : lr_{learning_rate}
    , b1_{beta1}
    , b2_{beta2}
    , eps_{eps}
    , m_(n, 0.0)
    , v_(n, 0.0)
  {
  }

  void step(std::span<double> x, std::span<double const> grad)
  {
    require_shape(x.size() == m_.size() && grad.size() == m_.size(), "adam: parameter size mismatch");
    b1t_ *= b1_;
    b2t_ *= b2_;
    for (size_t i = 0; i < m_.size(); i++) {
      m_[i] = b1_ * m_[i] + (1 - b1_) * grad[i];
      v_[i] = b2_ * v_[i] + (1 - b2_) * grad[i] * grad[i];
      x[i] -= lr_ * (m_[i] / (1 - b1t_)) / (std::sqrt(v_[i] / (1 - b2t_)) + eps_);
    }
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

private:
  double lr_, b1_, b2_, eps_;
  double b1t_ = 1.0, b2t_ = 1.0;
  std::vector<double> m_, v_;
};

} // namespace moco5d
