#pragma once

#include <optional>

#include "depthforge/influence.hpp"
#include "depthforge/solver.hpp"

namespace depthforge {

/// Halfspace depth of the Watson influences over the tangent space at mu0.
DepthResult watson_depth(const Matrix& z, const UnitVector& mu0, const SolverConfig& config = {});

/// Depth of z_i over the tangent space at mu0 (equality constraint v^T mu0 = 0).
DepthResult vmf_depth(const Matrix& z, const UnitVector& mu0, const SolverConfig& config = {});

/// Order-2 problems, exposed so the two vMF code paths can be compared.
OrderTwoProblem vmf_order2_problem(const Matrix& z, const UnitVector& mu0);
OrderTwoProblem watson_order2_problem(const Matrix& z, const UnitVector& mu0, int kappa_sign);

/// Product criterion with h_i = <mu0, z_i>, constant in the direction.
DepthResult vmf_order2_depth(const Matrix& z, const UnitVector& mu0,
                             const SolverConfig& config = {});

/// The same value through the factorization #{i : h_i >= 0} * min_v sum_i 1~(<v, z_i>).
DepthResult vmf_order2_depth_factorized(const Matrix& z, const UnitVector& mu0,
                                        const SolverConfig& config = {});

/// Product criterion with g_i = -s <mu0, z_i><v, z_i> and
/// h_i = -s (<v, z_i>^2 - <mu0, z_i>^2), s = kappa_sign.
DepthResult watson_order2_depth(const Matrix& z, const UnitVector& mu0, int kappa_sign,
                                const SolverConfig& config = {});

/// Principal component depth; the vector channel exists only with an intercept.
DepthResult pc_depth(const Matrix& z, const std::optional<Vector>& mu0, const StiefelPoint& u0,
                     const SolverConfig& config = {});

/// Orthogonal complement depth (also a multivariate orthogonal regression depth).
DepthResult oc_depth(const Matrix& z, const std::optional<Vector>& mubar0,
                     const StiefelPoint& ubar0, const SolverConfig& config = {});

DepthResult riemannian_depth_generic(const InfluenceSet& influences, const TangentBasis& tangent,
                                     const SolverConfig& config = {});

}  // namespace depthforge
