#pragma once

#include <string>
#include <vector>

#include "depthforge/influence.hpp"
#include "depthforge/types.hpp"

namespace depthforge {

/// A thresholding rule Theta(.; lambda) together with its shape parameter.
/// SCAD uses `aux` as a (> 2), MCP uses it as gamma (> 1).
struct ThresholdRule {
  enum class Kind { soft, hard, scad, mcp };

  static constexpr double kDefaultScadA = 3.7;
  static constexpr double kDefaultMcpGamma = 3.0;

  Kind kind = Kind::soft;
  double lambda = 0.0;
  double aux = 0.0;

  static ThresholdRule soft(double lambda);
  static ThresholdRule hard(double lambda);
  static ThresholdRule scad(double lambda, double a = kDefaultScadA);
  static ThresholdRule mcp(double lambda, double gamma = kDefaultMcpGamma);
  static ThresholdRule parse(const std::string& name, double lambda);

  std::string name() const;
  void validate() const;
  ThresholdRule with_lambda(double new_lambda) const;
};

double threshold(const ThresholdRule& rule, double t);
Vector threshold(const ThresholdRule& rule, const Vector& t);

/// sup{t : Theta(t) <= u} for u >= 0, extended oddly to u < 0.
double threshold_inverse(const ThresholdRule& rule, double u);

/// The same supremum located by bisection on Theta alone (no closed form).
double threshold_inverse_bisect(const ThresholdRule& rule, double u);

/// Penalty P = P_Theta + q inducing the rule, in closed form.
/// For hard thresholding this is the l0 penalty lambda^2/2 1{t != 0}.
double threshold_penalty(const ThresholdRule& rule, double t);

/// Magnitudes at which Theta jumps (hard thresholding: lambda); empty otherwise.
std::vector<double> threshold_discontinuities(const ThresholdRule& rule);

struct GammaVector {
  Vector values;
  std::vector<Index> support;
};

/// gamma_j = Theta^{-1}(|beta_j|) sgn(beta_j) - beta_j on the support of beta;
/// identically zero for hard thresholding.
GammaVector gamma_vector(const ThresholdRule& rule, const Vector& beta0);

/// Keeps the q largest-magnitude entries. Ties at equal magnitude keep the
/// smaller index.
Vector quantile_threshold(const Vector& alpha, Index q);

/// Indices kept by quantile_threshold, in increasing order.
std::vector<Index> quantile_support(const Vector& alpha, Index q);

/// Rank-r truncation of the singular value decomposition.
Matrix matrix_quantile_threshold(const Matrix& b, Index r);

struct FixedPointCheck {
  double residual = 0.0;
  /// Some argument of Theta lies within 1e-8 of a jump of the rule.
  bool near_discontinuity = false;
};

/// ||beta - Theta(beta - X^T grad l(X beta); lambda)||_2. Assumes the caller
/// has scaled X so that ||X||_2 <= 1/sqrt(L).
FixedPointCheck check_theta_fixed_point(const Vector& beta, const Matrix& x, const Vector& y,
                                        const PointwiseLoss& loss, const ThresholdRule& rule);

/// ||beta - Theta#(beta - X^T grad l(X beta) / rho; q)||_2.
double check_quantile_fixed_point(const Vector& beta, const Matrix& x, const Vector& y,
                                  const PointwiseLoss& loss, Index q, double rho);

/// ||B - Theta_sigma#(B - X^T (X B - Y) / rho; r)||_F.
double check_rrr_fixed_point(const Matrix& b, const Matrix& x, const Matrix& y, Index r,
                             double rho);

}  // namespace depthforge
