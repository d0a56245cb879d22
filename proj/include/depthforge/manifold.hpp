#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "depthforge/types.hpp"

namespace depthforge {

/// A point on the unit sphere S^{m-1}. Construction checks ||data|| = 1.
class UnitVector {
 public:
  static constexpr double kTolerance = 1e-10;

  explicit UnitVector(Vector data);
  /// Normalizes a nonzero vector.
  static UnitVector normalized(const Vector& v);

  const Vector& data() const { return data_; }
  Index dim() const { return data_.size(); }

 private:
  Vector data_;
};

/// A column-orthonormal m x r matrix, m >= r >= 1.
class StiefelPoint {
 public:
  static constexpr double kTolerance = 1e-10;

  explicit StiefelPoint(Matrix data);
  /// Orthonormalizes the columns of a full column rank matrix (thin QR with
  /// the sign of R's diagonal made positive).
  static StiefelPoint orthonormalized(const Matrix& m);

  const Matrix& data() const { return data_; }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }

 private:
  Matrix data_;
};

/// Orthonormal basis (d x k) of a linear subspace of R^d in which projection
/// directions are constrained to live.
class TangentBasis {
 public:
  explicit TangentBasis(Matrix basis);
  static TangentBasis identity(Index d);
  /// Block-diagonal basis of a product space, coordinates concatenated.
  static TangentBasis product(const TangentBasis& first, const TangentBasis& second);

  const Matrix& basis() const { return basis_; }
  Index ambient_dim() const { return basis_.rows(); }
  Index dim() const { return basis_.cols(); }

 private:
  Matrix basis_;
};

/// w - <w, mu> mu.
Vector sphere_tangent_project(const UnitVector& mu, const Vector& w);

/// Basis of {B : U^T B + B^T U = 0}, columns are vec(B) in column-major
/// layout. Generators U (E_ab - E_ba)/sqrt(2) for a < b, then U_perp E_jk.
/// Dimension m r - r (r + 1) / 2.
TangentBasis stiefel_tangent_basis(const StiefelPoint& u);

/// Basis of the tangent space {u : u^T mu = 0} of the sphere at mu.
TangentBasis sphere_tangent_basis(const UnitVector& mu);

/// m x (m - r) matrix W with orthonormal columns and U^T W = 0, from a full
/// Householder QR. Sign convention: the first entry of each column whose
/// magnitude exceeds 1e-12 is positive. Returns a 0-column matrix when m = r.
Matrix orthonormal_complement(const Matrix& u);

/// Per-sample loss restricted to geodesics of the sphere. When `analytic` is
/// set, it returns (g, h) for a given (mu, v); otherwise central finite
/// differences of `value` with step 1e-5 are used.
struct SphereLoss {
  Index samples = 0;
  std::function<double(Index, const Vector&)> value;
  std::function<std::pair<Vector, Vector>(const Vector&, const Vector&)> analytic;
};

/// l_i(z) = -kappa <z_i, x>^2 (Watson negative log-likelihood, up to constants).
SphereLoss watson_loss(const Matrix& z, double kappa);
/// l_i(z) = -kappa <z_i, x> (von Mises-Fisher).
SphereLoss vmf_loss(const Matrix& z, double kappa);

struct GeodesicDerivatives {
  Vector first;   // g_i = d/dt l_i(gamma(t)) at 0
  Vector second;  // h_i = d^2/dt^2 l_i(gamma(t)) at 0
};

/// Derivatives along gamma(t) = mu cos t + v sin t.
GeodesicDerivatives sphere_geodesic_derivatives(const UnitVector& mu, const UnitVector& v,
                                                const SphereLoss& loss);

/// Same, forcing the finite-difference path (used to cross-check closed forms).
GeodesicDerivatives sphere_geodesic_derivatives_fd(const UnitVector& mu, const UnitVector& v,
                                                   const SphereLoss& loss);

}  // namespace depthforge
