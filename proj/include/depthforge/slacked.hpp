#pragma once

#include <optional>

#include "depthforge/influence.hpp"
#include "depthforge/solver.hpp"
#include "depthforge/threshold.hpp"

namespace depthforge {

/// Relative singular value cutoff for "rank(B) = r".
constexpr double kRankTolerance = 1e-8;

/// Number of singular values with sigma_i / sigma_1 >= kRankTolerance (0 for B = 0).
Index certified_rank(const Matrix& b);

/// sigma_hat sqrt(2 n log p), sigma_hat = 1.4826 * MAD of the residuals.
double default_lambda(const Vector& residuals, Index p);

/// Design rescaling X / sqrt(rho) that puts ||X||_2 <= 1/sqrt(L) when
/// rho >= L ||X||_2^2. The default rho is 1.01 L ||X||_2^2.
double default_rho(const Matrix& x, const PointwiseLoss& loss);

// Problem builders (exposed for tests and the CLI), followed by the depths.

DepthProblem nonnegative_regression_problem(const Matrix& x, const Vector& y, const Vector& beta0);
DepthResult nonnegative_regression_depth(const Matrix& x, const Vector& y, const Vector& beta0,
                                         const SolverConfig& config = {});

/// Theta-depth: influences x_i l0'(x_i^T beta0), offset gamma(beta0)/n and a
/// box slack of radius lambda on the zero set of beta0. When `rho` is given,
/// the problem is posed in the rescaled coordinates X / sqrt(rho),
/// beta0 sqrt(rho) used by fit_tisp; otherwise X is taken as already scaled.
DepthProblem theta_problem(const Matrix& x, const Vector& y, const Vector& beta0,
                           const ThresholdRule& rule, const PointwiseLoss& loss,
                           std::optional<double> rho = std::nullopt);
DepthResult theta_depth(const Matrix& x, const Vector& y, const Vector& beta0,
                        const ThresholdRule& rule, const PointwiseLoss& loss,
                        const SolverConfig& config = {}, std::optional<double> rho = std::nullopt);

/// ||X_Z^T grad l(X beta0)||_inf over the zero set Z of beta0 (0 if Z is empty).
double theta_sharp_bound(const Matrix& x, const Vector& y, const Vector& beta0,
                         const PointwiseLoss& loss);
DepthProblem theta_sharp_problem(const Matrix& x, const Vector& y, const Vector& beta0, Index q,
                                 const PointwiseLoss& loss);
DepthResult theta_sharp_depth(const Matrix& x, const Vector& y, const Vector& beta0, Index q,
                              const PointwiseLoss& loss, const SolverConfig& config = {});

/// ||P_perp^T X^T (X B0 - Y) Q_perp||_2 with P, Q from the compact SVD of B0
/// at its certified rank; 0 when either complement is empty.
double rrr_slack_bound(const Matrix& x, const Matrix& y, const Matrix& b0);
DepthProblem rrr_problem(const Matrix& x, const Matrix& y, const Matrix& b0, Index r);
DepthResult rrr_depth(const Matrix& x, const Matrix& y, const Matrix& b0, Index r,
                      const SolverConfig& config = {});

/// ||vec(X^T (X A0 - Y U0))[Z]||_inf over the zero set Z of vec(A0).
double sparse_rrr_bound(const Matrix& x, const Matrix& y, const Matrix& a0,
                        const StiefelPoint& u0);
DepthProblem sparse_rrr_problem(const Matrix& x, const Matrix& y, const Matrix& a0,
                                const StiefelPoint& u0, Index q);
DepthResult sparse_rrr_depth(const Matrix& x, const Matrix& y, const Matrix& a0,
                             const StiefelPoint& u0, Index q, const SolverConfig& config = {});

}  // namespace depthforge
