#include "depthforge/influence.hpp"

#include <cmath>

namespace depthforge {

namespace {

void require_unit_rows(const Matrix& z) {
  require(z.rows() >= 1, "data must have at least one row");
  require(z.allFinite(), "data has non-finite entries");
  for (Index i = 0; i < z.rows(); ++i) {
    require(std::abs(z.row(i).norm() - 1.0) <= 1e-8,
            "row " + std::to_string(i + 1) + " is not a unit vector");
  }
}

void require_design(const Matrix& x, Index y_rows, const char* who) {
  require(x.rows() >= 1, std::string(who) + ": no samples");
  require(x.rows() == y_rows, std::string(who) + ": X and response row counts differ");
  require(x.allFinite(), std::string(who) + ": X has non-finite entries");
}

// Inputs are finite by now, so a non-finite influence means overflow.
InfluenceSet computed(Matrix t, const char* who) {
  if (!t.allFinite()) throw NumericError(std::string(who) + ": influences overflow to non-finite values");
  return InfluenceSet(std::move(t));
}

}  // namespace

PointwiseLoss::PointwiseLoss(Kind kind, double huber_constant)
    : kind_(kind), huber_(huber_constant) {
  require(huber_ > 0.0, "Huber constant must be positive");
}

PointwiseLoss PointwiseLoss::parse(const std::string& name) {
  if (name == "squared") return PointwiseLoss(Kind::squared);
  if (name == "logistic") return PointwiseLoss(Kind::logistic);
  if (name == "huber") return PointwiseLoss(Kind::huber);
  throw ValidationError("unknown loss '" + name + "' (expected squared|logistic|huber)");
}

std::string PointwiseLoss::name() const {
  switch (kind_) {
    case Kind::squared: return "squared";
    case Kind::logistic: return "logistic";
    case Kind::huber: return "huber";
  }
  return "squared";
}

double PointwiseLoss::value(double u, double y) const {
  switch (kind_) {
    case Kind::squared: return 0.5 * (u - y) * (u - y);
    case Kind::logistic: {
      // log(1 + e^u) - y u, evaluated stably.
      const double softplus = u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
      return softplus - y * u;
    }
    case Kind::huber: {
      const double r = std::abs(u - y);
      return r <= huber_ ? 0.5 * r * r : huber_ * (r - 0.5 * huber_);
    }
  }
  return 0.0;
}

double PointwiseLoss::derivative(double u, double y) const {
  switch (kind_) {
    case Kind::squared: return u - y;
    case Kind::logistic: {
      const double p = u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
      return p - y;
    }
    case Kind::huber: {
      const double r = u - y;
      if (r > huber_) return huber_;
      if (r < -huber_) return -huber_;
      return r;
    }
  }
  return 0.0;
}

double PointwiseLoss::lipschitz() const { return kind_ == Kind::logistic ? 0.25 : 1.0; }

Vector PointwiseLoss::gradient(const Vector& fitted, const Vector& y) const {
  require(fitted.size() == y.size(), "loss gradient: size mismatch");
  Vector g(fitted.size());
  for (Index i = 0; i < g.size(); ++i) g(i) = derivative(fitted(i), y(i));
  if (!g.allFinite()) throw NumericError("loss derivative is not finite");
  return g;
}

double PointwiseLoss::total(const Vector& fitted, const Vector& y) const {
  double s = 0.0;
  for (Index i = 0; i < fitted.size(); ++i) s += value(fitted(i), y(i));
  return s;
}

InfluenceSet location_influence(const Matrix& z, const Vector& mu0) {
  require(z.rows() >= 1, "location_influence: no samples");
  require(z.cols() == mu0.size(), "location_influence: dimension mismatch");
  require(z.allFinite() && mu0.allFinite(), "location_influence: non-finite input");
  return computed(z.rowwise() - mu0.transpose(), "location_influence");
}

InfluenceSet regression_influence(const Matrix& x, const Vector& y, const Vector& beta0) {
  require_design(x, y.size(), "regression_influence");
  require(x.cols() == beta0.size(), "regression_influence: coefficient dimension mismatch");
  require(y.allFinite() && beta0.allFinite(), "regression_influence: non-finite input");
  const Vector residual = x * beta0 - y;
  return computed(x.array().colwise() * residual.array(), "regression_influence");
}

InfluenceSet watson_influence(const Matrix& z, const UnitVector& mu0) {
  require_unit_rows(z);
  require(z.cols() == mu0.dim(), "watson_influence: dimension mismatch");
  const Vector c = z * mu0.data();
  Matrix t(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    t.row(i) = c(i) * (z.row(i) - c(i) * mu0.data().transpose());
  }
  return computed(std::move(t), "watson_influence");
}

RiemannianInfluence vmf_influence(const Matrix& z, const UnitVector& mu0) {
  require_unit_rows(z);
  require(z.cols() == mu0.dim(), "vmf_influence: dimension mismatch");
  return {InfluenceSet(z), sphere_tangent_basis(mu0)};
}

RiemannianInfluence pc_influence(const Matrix& z, const std::optional<Vector>& mu0,
                                 const StiefelPoint& u0) {
  const Index m = z.cols();
  const Index r = u0.cols();
  require(z.rows() >= 1, "pc_influence: no samples");
  require(z.allFinite() && (!mu0 || mu0->allFinite()), "pc_influence: non-finite input");
  require(u0.rows() == m, "pc_influence: loading rows must equal data columns");
  require(!mu0 || mu0->size() == m, "pc_influence: intercept dimension mismatch");
  const Matrix& U = u0.data();
  const Vector center = mu0 ? *mu0 : Vector::Zero(m);
  const Matrix projector = Matrix::Identity(m, m) - U * U.transpose();
  const Index head = mu0 ? m : 0;
  Matrix t(z.rows(), head + m * r);
  for (Index i = 0; i < z.rows(); ++i) {
    const Vector d = center - z.row(i).transpose();
    if (mu0) t.row(i).head(m) = (projector * d).transpose();
    const Matrix block = -d * (d.transpose() * U);
    t.row(i).tail(m * r) = vec(block).transpose();
  }
  TangentBasis stiefel = stiefel_tangent_basis(u0);
  TangentBasis directions =
      mu0 ? TangentBasis::product(TangentBasis::identity(m), stiefel) : std::move(stiefel);
  return {computed(std::move(t), "pc_influence"), std::move(directions)};
}

RiemannianInfluence oc_influence(const Matrix& z, const std::optional<Vector>& mubar0,
                                 const StiefelPoint& ubar0) {
  const Index m = z.cols();
  const Index rb = ubar0.cols();
  require(z.rows() >= 1, "oc_influence: no samples");
  require(z.allFinite() && (!mubar0 || mubar0->allFinite()), "oc_influence: non-finite input");
  require(ubar0.rows() == m, "oc_influence: loading rows must equal data columns");
  require(!mubar0 || mubar0->size() == rb, "oc_influence: intercept dimension mismatch");
  const Matrix& U = ubar0.data();
  const Vector center = mubar0 ? *mubar0 : Vector::Zero(rb);
  const Index head = mubar0 ? rb : 0;
  Matrix t(z.rows(), head + m * rb);
  for (Index i = 0; i < z.rows(); ++i) {
    const Vector zi = z.row(i).transpose();
    const Vector proj = U.transpose() * zi;
    if (mubar0) t.row(i).head(rb) = (center - proj).transpose();
    const Matrix block = zi * proj.transpose() - zi * center.transpose();
    t.row(i).tail(m * rb) = vec(block).transpose();
  }
  TangentBasis stiefel = stiefel_tangent_basis(ubar0);
  TangentBasis directions =
      mubar0 ? TangentBasis::product(TangentBasis::identity(rb), stiefel) : std::move(stiefel);
  return {computed(std::move(t), "oc_influence"), std::move(directions)};
}

InfluenceSet glm_influence(const Matrix& x, const Vector& y, const Vector& beta0,
                           const PointwiseLoss& loss) {
  require_design(x, y.size(), "glm_influence");
  require(x.cols() == beta0.size(), "glm_influence: coefficient dimension mismatch");
  require(y.allFinite() && beta0.allFinite(), "glm_influence: non-finite input");
  const Vector slope = loss.gradient(x * beta0, y);
  return computed(x.array().colwise() * slope.array(), "glm_influence");
}

InfluenceSet rrr_influence(const Matrix& x, const Matrix& y, const Matrix& b0) {
  require_design(x, y.rows(), "rrr_influence");
  require(b0.rows() == x.cols() && b0.cols() == y.cols(), "rrr_influence: B0 must be p x m");
  require(y.allFinite() && b0.allFinite(), "rrr_influence: non-finite input");
  const Matrix residual = x * b0 - y;  // n x m
  const Index p = x.cols();
  const Index m = y.cols();
  Matrix t(x.rows(), p * m);
  for (Index i = 0; i < x.rows(); ++i) {
    const Matrix block = x.row(i).transpose() * residual.row(i);
    t.row(i) = vec(block).transpose();
  }
  return computed(std::move(t), "rrr_influence");
}

RiemannianInfluence sparse_rrr_influence(const Matrix& x, const Matrix& y, const Matrix& a0,
                                         const StiefelPoint& u0) {
  require_design(x, y.rows(), "sparse_rrr_influence");
  const Index p = x.cols();
  const Index m = y.cols();
  const Index r = u0.cols();
  require(u0.rows() == m, "sparse_rrr_influence: U0 must be m x r");
  require(a0.rows() == p && a0.cols() == r, "sparse_rrr_influence: A0 must be p x r");
  require(y.allFinite() && a0.allFinite(), "sparse_rrr_influence: non-finite input");
  const Matrix scores = x * a0;                    // n x r, x_i^T A0
  const Matrix residual = scores - y * u0.data();  // n x r
  Matrix t(x.rows(), m * r + p * r);
  for (Index i = 0; i < x.rows(); ++i) {
    const Matrix w_block = -y.row(i).transpose() * scores.row(i);
    const Matrix v_block = x.row(i).transpose() * residual.row(i);
    t.row(i).head(m * r) = vec(w_block).transpose();
    t.row(i).tail(p * r) = vec(v_block).transpose();
  }
  TangentBasis directions =
      TangentBasis::product(stiefel_tangent_basis(u0), TangentBasis::identity(p * r));
  return {computed(std::move(t), "sparse_rrr_influence"), std::move(directions)};
}

}  // namespace depthforge
