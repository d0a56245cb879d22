#include "depthforge/riemannian.hpp"

namespace depthforge {

DepthResult watson_depth(const Matrix& z, const UnitVector& mu0, const SolverConfig& config) {
  return solve_depth(DepthProblem(watson_influence(z, mu0), sphere_tangent_basis(mu0)), config);
}

DepthResult vmf_depth(const Matrix& z, const UnitVector& mu0, const SolverConfig& config) {
  RiemannianInfluence ri = vmf_influence(z, mu0);
  return solve_depth(DepthProblem(std::move(ri.influences), std::move(ri.directions)), config);
}

OrderTwoProblem vmf_order2_problem(const Matrix& z, const UnitVector& mu0) {
  RiemannianInfluence ri = vmf_influence(z, mu0);
  const Index m = z.cols();
  const Vector h = z * mu0.data();
  OrderTwoProblem p{std::move(ri.influences), std::move(ri.directions), {}, {}};
  // For unit v, v^T (h_i I) v = h_i.
  for (Index i = 0; i < z.rows(); ++i) {
    p.second_order.quadratic_forms.push_back(h(i) * Matrix::Identity(m, m));
  }
  return p;
}

OrderTwoProblem watson_order2_problem(const Matrix& z, const UnitVector& mu0, int kappa_sign) {
  require(kappa_sign == 1 || kappa_sign == -1, "kappa sign must be +1 or -1");
  const TangentBasis tangent = sphere_tangent_basis(mu0);
  watson_influence(z, mu0);  // validates unit rows and shapes
  const double s = static_cast<double>(kappa_sign);
  const Index m = z.cols();
  const Vector c = z * mu0.data();
  Matrix g = z;
  for (Index i = 0; i < z.rows(); ++i) g.row(i) *= -s * c(i);
  OrderTwoProblem p{InfluenceSet(std::move(g)), tangent, {}, {}};
  for (Index i = 0; i < z.rows(); ++i) {
    const Vector zi = z.row(i).transpose();
    p.second_order.quadratic_forms.push_back(
        -s * (zi * zi.transpose() - c(i) * c(i) * Matrix::Identity(m, m)));
  }
  return p;
}

DepthResult vmf_order2_depth(const Matrix& z, const UnitVector& mu0, const SolverConfig& config) {
  return order2_depth(vmf_order2_problem(z, mu0), config);
}

DepthResult vmf_order2_depth_factorized(const Matrix& z, const UnitVector& mu0,
                                        const SolverConfig& config) {
  RiemannianInfluence ri = vmf_influence(z, mu0);
  const Vector h = z * mu0.data();
  double nonneg = 0.0;
  for (Index i = 0; i < h.size(); ++i) nonneg += h(i) >= -config.zero_tol ? 1.0 : 0.0;
  DepthResult r = solve_depth(DepthProblem(std::move(ri.influences), std::move(ri.directions),
                                           std::nullopt, Indicator::half_open),
                              config);
  r.value *= nonneg;
  const double n = static_cast<double>(r.samples);
  r.normalized = r.value / (n * n);
  return r;
}

DepthResult watson_order2_depth(const Matrix& z, const UnitVector& mu0, int kappa_sign,
                                const SolverConfig& config) {
  return order2_depth(watson_order2_problem(z, mu0, kappa_sign), config);
}

DepthResult pc_depth(const Matrix& z, const std::optional<Vector>& mu0, const StiefelPoint& u0,
                     const SolverConfig& config) {
  RiemannianInfluence ri = pc_influence(z, mu0, u0);
  return solve_depth(DepthProblem(std::move(ri.influences), std::move(ri.directions)), config);
}

DepthResult oc_depth(const Matrix& z, const std::optional<Vector>& mubar0,
                     const StiefelPoint& ubar0, const SolverConfig& config) {
  RiemannianInfluence ri = oc_influence(z, mubar0, ubar0);
  return solve_depth(DepthProblem(std::move(ri.influences), std::move(ri.directions)), config);
}

DepthResult riemannian_depth_generic(const InfluenceSet& influences, const TangentBasis& tangent,
                                     const SolverConfig& config) {
  return solve_depth(DepthProblem(influences, tangent), config);
}

}  // namespace depthforge
