#pragma once

#include <optional>
#include <string>

#include "depthforge/influence_set.hpp"
#include "depthforge/manifold.hpp"

namespace depthforge {

/// Influences together with the subspace the projection direction lives in.
struct RiemannianInfluence {
  InfluenceSet influences;
  TangentBasis directions;
};

/// Pointwise loss l0(u; y) on the systematic component u = x^T beta.
class PointwiseLoss {
 public:
  enum class Kind { squared, logistic, huber };

  static constexpr double kDefaultHuber = 1.345;

  explicit PointwiseLoss(Kind kind = Kind::squared, double huber_constant = kDefaultHuber);
  static PointwiseLoss parse(const std::string& name);

  Kind kind() const { return kind_; }
  std::string name() const;
  double value(double u, double y) const;
  double derivative(double u, double y) const;
  /// Lipschitz constant of the derivative in u.
  double lipschitz() const;

  /// Vector of l0'(x_i^T beta; y_i), i.e. the gradient of sum_i l0 w.r.t. X beta.
  Vector gradient(const Vector& fitted, const Vector& y) const;
  double total(const Vector& fitted, const Vector& y) const;

 private:
  Kind kind_;
  double huber_;
};

/// T_i = z_i - mu0.
InfluenceSet location_influence(const Matrix& z, const Vector& mu0);

/// T_i = x_i (x_i^T beta0 - y_i).
InfluenceSet regression_influence(const Matrix& x, const Vector& y, const Vector& beta0);

/// T_i = <z_i, mu0> (z_i - <z_i, mu0> mu0), tangent at mu0.
InfluenceSet watson_influence(const Matrix& z, const UnitVector& mu0);

/// T_i = z_i; the tangent basis at mu0 carries the constraint v^T mu0 = 0.
RiemannianInfluence vmf_influence(const Matrix& z, const UnitVector& mu0);

/// Principal component influences. The vector block (I - U U^T)(mu0 - z_i) is
/// present only when an intercept `mu0` is given; the matrix block is
/// -vec((mu0 - z_i)(mu0 - z_i)^T U), with mu0 = 0 when absent.
RiemannianInfluence pc_influence(const Matrix& z, const std::optional<Vector>& mu0,
                                 const StiefelPoint& u0);

/// Orthogonal complement influences: vector block mubar0 - Ubar0^T z_i (only
/// with an intercept), matrix block vec(z_i z_i^T Ubar0 - z_i mubar0^T).
RiemannianInfluence oc_influence(const Matrix& z, const std::optional<Vector>& mubar0,
                                 const StiefelPoint& ubar0);

/// T_i = x_i l0'(x_i^T beta0; y_i).
InfluenceSet glm_influence(const Matrix& x, const Vector& y, const Vector& beta0,
                           const PointwiseLoss& loss);

/// T_i = vec(x_i (x_i^T B0 - y_i^T)), p x m blocks.
InfluenceSet rrr_influence(const Matrix& x, const Matrix& y, const Matrix& b0);

/// Sparse reduced-rank influences for (A0, U0): first the U-block
/// -vec(y_i x_i^T A0) (m x r, tangent to the Stiefel manifold at U0), then the
/// A-block vec(x_i (x_i^T A0 - y_i^T U0)) (p x r, unconstrained).
RiemannianInfluence sparse_rrr_influence(const Matrix& x, const Matrix& y, const Matrix& a0,
                                         const StiefelPoint& u0);

}  // namespace depthforge
