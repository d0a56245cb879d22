#include "depthforge/manifold.hpp"

#include <cmath>
#include <sstream>

#include "depthforge/influence_set.hpp"

namespace depthforge {

UnitVector::UnitVector(Vector data) : data_(std::move(data)) {
  require(data_.size() >= 1, "unit vector must have at least one entry");
  require(data_.allFinite(), "unit vector has non-finite entries");
  require(std::abs(data_.norm() - 1.0) <= kTolerance, "vector is not of unit length");
}

UnitVector UnitVector::normalized(const Vector& v) {
  const double norm = v.norm();
  require(norm > 0.0 && std::isfinite(norm), "cannot normalize a zero or non-finite vector");
  return UnitVector(v / norm);
}

StiefelPoint::StiefelPoint(Matrix data) : data_(std::move(data)) {
  require(data_.cols() >= 1 && data_.rows() >= data_.cols(),
          "Stiefel point must be m x r with m >= r >= 1");
  require(data_.allFinite(), "Stiefel point has non-finite entries");
  const Matrix gram = data_.transpose() * data_;
  const double err = (gram - Matrix::Identity(data_.cols(), data_.cols())).cwiseAbs().maxCoeff();
  require(err <= kTolerance, "matrix columns are not orthonormal");
}

StiefelPoint StiefelPoint::orthonormalized(const Matrix& m) {
  require(m.cols() >= 1 && m.rows() >= m.cols(), "orthonormalize needs m >= r >= 1");
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  const Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
  for (Index j = 0; j < m.cols(); ++j) {
    require(std::abs(r(j, j)) > 1e-14 * std::max(1.0, m.norm()), "matrix is column rank deficient");
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return StiefelPoint(q);
}

TangentBasis::TangentBasis(Matrix basis) : basis_(std::move(basis)) {
  require(basis_.rows() >= 1, "tangent basis needs ambient dimension >= 1");
  require(basis_.cols() <= basis_.rows(), "tangent basis has more columns than rows");
  if (basis_.cols() > 0) {
    const Matrix gram = basis_.transpose() * basis_;
    const double err =
        (gram - Matrix::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff();
    require(err <= 1e-10, "tangent basis columns are not orthonormal");
  }
}

TangentBasis TangentBasis::identity(Index d) { return TangentBasis(Matrix::Identity(d, d)); }

TangentBasis TangentBasis::product(const TangentBasis& first, const TangentBasis& second) {
  Matrix b = Matrix::Zero(first.ambient_dim() + second.ambient_dim(), first.dim() + second.dim());
  b.topLeftCorner(first.ambient_dim(), first.dim()) = first.basis();
  b.bottomRightCorner(second.ambient_dim(), second.dim()) = second.basis();
  return TangentBasis(std::move(b));
}

Vector sphere_tangent_project(const UnitVector& mu, const Vector& w) {
  require(w.size() == mu.dim(), "sphere_tangent_project: dimension mismatch");
  return w - w.dot(mu.data()) * mu.data();
}

Matrix orthonormal_complement(const Matrix& u) {
  const Index m = u.rows();
  const Index r = u.cols();
  require(m >= r, "orthonormal_complement: more columns than rows");
  if (m == r) return Matrix(m, 0);
  Eigen::HouseholderQR<Matrix> qr(u);
  const Matrix full = qr.householderQ();
  Matrix w = full.rightCols(m - r);
  for (Index j = 0; j < w.cols(); ++j) {
    for (Index i = 0; i < m; ++i) {
      if (std::abs(w(i, j)) > 1e-12) {
        if (w(i, j) < 0) w.col(j) = -w.col(j);
        break;
      }
    }
  }
  return w;
}

TangentBasis stiefel_tangent_basis(const StiefelPoint& u) {
  const Index m = u.rows();
  const Index r = u.cols();
  const Index k = m * r - r * (r + 1) / 2;
  const Matrix& U = u.data();
  const Matrix perp = orthonormal_complement(U);
  Matrix basis(m * r, k);
  Index col = 0;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (Index a = 0; a < r; ++a) {
    for (Index b = a + 1; b < r; ++b) {
      // U (E_ab - E_ba) / sqrt(2): column b gets U_a, column a gets -U_b.
      Matrix gen = Matrix::Zero(m, r);
      gen.col(b) = U.col(a) * inv_sqrt2;
      gen.col(a) = -U.col(b) * inv_sqrt2;
      basis.col(col++) = vec(gen);
    }
  }
  for (Index j = 0; j < perp.cols(); ++j) {
    for (Index c = 0; c < r; ++c) {
      Matrix gen = Matrix::Zero(m, r);
      gen.col(c) = perp.col(j);
      basis.col(col++) = vec(gen);
    }
  }
  if (k == 0) return TangentBasis(Matrix(m * r, 0));
  return TangentBasis(std::move(basis));
}

TangentBasis sphere_tangent_basis(const UnitVector& mu) {
  const Matrix mu_col = mu.data();
  return TangentBasis(orthonormal_complement(mu_col));
}

SphereLoss watson_loss(const Matrix& z, double kappa) {
  SphereLoss loss;
  loss.samples = z.rows();
  loss.value = [z, kappa](Index i, const Vector& x) {
    const double c = z.row(i).dot(x);
    return -kappa * c * c;
  };
  loss.analytic = [z, kappa](const Vector& mu, const Vector& v) {
    const Vector cm = z * mu;
    const Vector cv = z * v;
    Vector g = -2.0 * kappa * cm.cwiseProduct(cv);
    Vector h = -2.0 * kappa * (cv.cwiseAbs2() - cm.cwiseAbs2());
    return std::make_pair(std::move(g), std::move(h));
  };
  return loss;
}

SphereLoss vmf_loss(const Matrix& z, double kappa) {
  SphereLoss loss;
  loss.samples = z.rows();
  loss.value = [z, kappa](Index i, const Vector& x) { return -kappa * z.row(i).dot(x); };
  loss.analytic = [z, kappa](const Vector& mu, const Vector& v) {
    Vector g = -kappa * (z * v);
    Vector h = kappa * (z * mu);
    return std::make_pair(std::move(g), std::move(h));
  };
  return loss;
}

namespace {

void check_geodesic_inputs(const UnitVector& mu, const UnitVector& v, const SphereLoss& loss) {
  require(mu.dim() == v.dim(), "geodesic derivatives: dimension mismatch");
  require(std::abs(mu.data().dot(v.data())) <= 1e-8, "geodesic direction is not tangent at mu");
  require(loss.value || loss.analytic, "geodesic derivatives: loss has no evaluator");
}

}  // namespace

GeodesicDerivatives sphere_geodesic_derivatives_fd(const UnitVector& mu, const UnitVector& v,
                                                   const SphereLoss& loss) {
  check_geodesic_inputs(mu, v, loss);
  require(static_cast<bool>(loss.value), "finite differences need a loss value function");
  constexpr double step = 1e-5;
  const Vector plus = mu.data() * std::cos(step) + v.data() * std::sin(step);
  const Vector minus = mu.data() * std::cos(step) - v.data() * std::sin(step);
  GeodesicDerivatives out{Vector(loss.samples), Vector(loss.samples)};
  for (Index i = 0; i < loss.samples; ++i) {
    const double fp = loss.value(i, plus);
    const double fm = loss.value(i, minus);
    const double f0 = loss.value(i, mu.data());
    out.first(i) = (fp - fm) / (2.0 * step);
    out.second(i) = (fp - 2.0 * f0 + fm) / (step * step);
  }
  return out;
}

GeodesicDerivatives sphere_geodesic_derivatives(const UnitVector& mu, const UnitVector& v,
                                                const SphereLoss& loss) {
  check_geodesic_inputs(mu, v, loss);
  if (loss.analytic) {
    auto [g, h] = loss.analytic(mu.data(), v.data());
    return {std::move(g), std::move(h)};
  }
  return sphere_geodesic_derivatives_fd(mu, v, loss);
}

// InfluenceSet lives next to the reparametrization it feeds.

InfluenceSet::InfluenceSet(Matrix r, std::optional<Vector> off)
    : rows(std::move(r)), offset(std::move(off)) {
  validate();
}

void InfluenceSet::validate() const {
  require(rows.cols() >= 1, "influence set needs ambient dimension >= 1");
  require(rows.allFinite(), "influence set has non-finite entries");
  if (offset) {
    require(offset->size() == rows.cols(), "influence offset dimension mismatch");
    require(offset->allFinite(), "influence offset has non-finite entries");
  }
}

InfluenceSet subspace_reparametrize(const InfluenceSet& influences, const TangentBasis& basis) {
  require(influences.dim() == basis.ambient_dim(),
          "subspace_reparametrize: influence dimension does not match basis");
  InfluenceSet out;
  out.rows = influences.rows * basis.basis();
  if (influences.offset) out.offset = Vector(basis.basis().transpose() * *influences.offset);
  return out;
}

}  // namespace depthforge
