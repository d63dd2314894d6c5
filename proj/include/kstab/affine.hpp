#pragma once

#include <Eigen/Dense>

namespace kstab {

/**
 * Affine function  phi(x) = <gradient, x> + constant  on R^m.
 *
 * Doubles as a half-space label L_i (normal u_i = gradient), as the
 * positive weight f, and as the extremal affine function a_0 + sum a_j x_j.
 */
struct AffineFunction {
  Eigen::VectorXd gradient;
  double constant = 0.0;

  AffineFunction() = default;
  AffineFunction(Eigen::VectorXd grad, double c)
      : gradient(std::move(grad)), constant(c) {}

  int dim() const { return static_cast<int>(gradient.size()); }

  double operator()(const Eigen::VectorXd& x) const {
    return gradient.dot(x) + constant;
  }

  static AffineFunction constant_one(int m) {
    return AffineFunction(Eigen::VectorXd::Zero(m), 1.0);
  }
  static AffineFunction zero(int m) {
    return AffineFunction(Eigen::VectorXd::Zero(m), 0.0);
  }
  static AffineFunction coordinate(int m, int i, double scale = 1.0,
                                   double offset = 0.0) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    g[i] = scale;
    return AffineFunction(std::move(g), offset);
  }
};

inline AffineFunction operator+(const AffineFunction& a, const AffineFunction& b) {
  return AffineFunction(a.gradient + b.gradient, a.constant + b.constant);
}
inline AffineFunction operator-(const AffineFunction& a, const AffineFunction& b) {
  return AffineFunction(a.gradient - b.gradient, a.constant - b.constant);
}
inline AffineFunction operator*(double t, const AffineFunction& a) {
  return AffineFunction(t * a.gradient, t * a.constant);
}

}  // namespace kstab
