#pragma once

#include <cmath>
#include <string>

#include "grouprobe/common.hpp"

namespace grouprobe {

enum class LossKind { LogisticMargin, Softmax, Squared };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

// Margin loss phi(z) = log(1 + exp(-z)) and its derivatives, evaluated
// without overflow for large |z|.
namespace logistic {

inline double value(double z) {
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// phi'(z) = sigmoid(z) - 1, always in (-1, 0).
inline double d1(double z) { return -sigmoid(-z); }

// phi''(z) = sigmoid(z) * sigmoid(-z), in (0, 1/4].
inline double d2(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s);
}

// phi'''(z) = phi''(z) * (1 - 2 sigmoid(z)).
inline double d3(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s) * (1.0 - 2.0 * s);
}

// max_z |phi'''(z)| = 1 / (6 sqrt(3)), attained at sigmoid(z) = (3 +- sqrt(3))/6.
inline double sup_abs_d3() { return 1.0 / (6.0 * std::sqrt(3.0)); }

}  // namespace logistic

// Squared margin loss 0.5 * (score - y)^2 with y in {-1, +1}.
namespace squared {

inline double value(double score, double y) {
  const double r = score - y;
  return 0.5 * r * r;
}

}  // namespace squared

}  // namespace grouprobe
