#include "depthforge/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace depthforge {

namespace {

double sgn(double t) { return (t > 0) - (t < 0); }

}  // namespace

ThresholdRule ThresholdRule::soft(double lambda) { return {Kind::soft, lambda, 0.0}; }
ThresholdRule ThresholdRule::hard(double lambda) { return {Kind::hard, lambda, 0.0}; }
ThresholdRule ThresholdRule::scad(double lambda, double a) { return {Kind::scad, lambda, a}; }
ThresholdRule ThresholdRule::mcp(double lambda, double gamma) { return {Kind::mcp, lambda, gamma}; }

ThresholdRule ThresholdRule::parse(const std::string& name, double lambda) {
  ThresholdRule rule;
  if (name == "soft") rule = soft(lambda);
  else if (name == "hard") rule = hard(lambda);
  else if (name == "scad") rule = scad(lambda);
  else if (name == "mcp") rule = mcp(lambda);
  else throw ValidationError("unknown rule '" + name + "' (expected soft|hard|scad|mcp)");
  rule.validate();
  return rule;
}

std::string ThresholdRule::name() const {
  switch (kind) {
    case Kind::soft: return "soft";
    case Kind::hard: return "hard";
    case Kind::scad: return "scad";
    case Kind::mcp: return "mcp";
  }
  return "soft";
}

void ThresholdRule::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, "threshold lambda must be finite and >= 0");
  if (kind == Kind::scad) require(aux > 2.0, "SCAD parameter a must exceed 2");
  if (kind == Kind::mcp) require(aux > 1.0, "MCP parameter gamma must exceed 1");
}

ThresholdRule ThresholdRule::with_lambda(double new_lambda) const {
  ThresholdRule r = *this;
  r.lambda = new_lambda;
  return r;
}

double threshold(const ThresholdRule& rule, double t) {
  const double a = std::abs(t);
  const double lam = rule.lambda;
  switch (rule.kind) {
    case ThresholdRule::Kind::soft:
      return sgn(t) * std::max(a - lam, 0.0);
    case ThresholdRule::Kind::hard:
      return a > lam ? t : 0.0;
    case ThresholdRule::Kind::scad: {
      const double sa = rule.aux;
      if (a <= 2.0 * lam) return sgn(t) * std::max(a - lam, 0.0);
      if (a <= sa * lam) return ((sa - 1.0) * t - sgn(t) * sa * lam) / (sa - 2.0);
      return t;
    }
    case ThresholdRule::Kind::mcp: {
      const double g = rule.aux;
      if (a <= lam) return 0.0;
      if (a <= g * lam) return sgn(t) * (a - lam) * g / (g - 1.0);
      return t;
    }
  }
  return t;
}

Vector threshold(const ThresholdRule& rule, const Vector& t) {
  Vector out(t.size());
  for (Index j = 0; j < t.size(); ++j) out(j) = threshold(rule, t(j));
  return out;
}

double threshold_inverse(const ThresholdRule& rule, double u) {
  if (u < 0) return -threshold_inverse(rule, -u);
  const double lam = rule.lambda;
  switch (rule.kind) {
    case ThresholdRule::Kind::soft:
      return u + lam;
    case ThresholdRule::Kind::hard:
      return std::max(u, lam);
    case ThresholdRule::Kind::scad: {
      const double a = rule.aux;
      if (u <= lam) return u + lam;
      if (u <= a * lam) return ((a - 2.0) * u + a * lam) / (a - 1.0);
      return u;
    }
    case ThresholdRule::Kind::mcp: {
      const double g = rule.aux;
      if (u <= g * lam) return lam + u * (g - 1.0) / g;
      return u;
    }
  }
  return u;
}

double threshold_inverse_bisect(const ThresholdRule& rule, double u) {
  if (u < 0) return -threshold_inverse_bisect(rule, -u);
  // Theta(t) >= t - lambda for every supported rule, so the sup is <= u + lambda.
  double lo = 0.0;
  double hi = u + rule.lambda + 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (threshold(rule, mid) <= u) lo = mid;
    else hi = mid;
  }
  return lo;
}

double threshold_penalty(const ThresholdRule& rule, double t) {
  const double a = std::abs(t);
  const double lam = rule.lambda;
  switch (rule.kind) {
    case ThresholdRule::Kind::soft:
      return lam * a;
    case ThresholdRule::Kind::hard:
      return a > 0 ? 0.5 * lam * lam : 0.0;
    case ThresholdRule::Kind::scad: {
      const double s = rule.aux;
      if (a <= lam) return lam * a;
      if (a <= s * lam) return (2.0 * s * lam * a - a * a - lam * lam) / (2.0 * (s - 1.0));
      return 0.5 * (s + 1.0) * lam * lam;
    }
    case ThresholdRule::Kind::mcp: {
      const double g = rule.aux;
      if (a <= g * lam) return lam * a - a * a / (2.0 * g);
      return 0.5 * g * lam * lam;
    }
  }
  return 0.0;
}

std::vector<double> threshold_discontinuities(const ThresholdRule& rule) {
  if (rule.kind == ThresholdRule::Kind::hard && rule.lambda > 0) return {rule.lambda};
  return {};
}

GammaVector gamma_vector(const ThresholdRule& rule, const Vector& beta0) {
  rule.validate();
  GammaVector out{Vector::Zero(beta0.size()), {}};
  for (Index j = 0; j < beta0.size(); ++j) {
    if (beta0(j) == 0.0) continue;
    out.support.push_back(j);
    if (rule.kind == ThresholdRule::Kind::hard) continue;
    const double b = beta0(j);
    // (|b| + lambda) - |b| is not exactly lambda in floating point.
    if (rule.kind == ThresholdRule::Kind::soft) out.values(j) = rule.lambda * sgn(b);
    else out.values(j) = threshold_inverse(rule, std::abs(b)) * sgn(b) - b;
  }
  return out;
}

std::vector<Index> quantile_support(const Vector& alpha, Index q) {
  require(q >= 0 && q <= alpha.size(), "quantile threshold q must lie in [0, p]");
  std::vector<Index> order(static_cast<std::size_t>(alpha.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(alpha(a)) > std::abs(alpha(b)); });
  order.resize(static_cast<std::size_t>(q));
  std::sort(order.begin(), order.end());
  return order;
}

Vector quantile_threshold(const Vector& alpha, Index q) {
  Vector out = Vector::Zero(alpha.size());
  for (Index j : quantile_support(alpha, q)) out(j) = alpha(j);
  return out;
}

Matrix matrix_quantile_threshold(const Matrix& b, Index r) {
  require(r >= 1 && r <= std::min(b.rows(), b.cols()), "rank must lie in [1, min(p, m)]");
  if (!b.allFinite()) throw NumericError("matrix_quantile_threshold: non-finite input");
  Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  for (Index i = r; i < s.size(); ++i) s(i) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

FixedPointCheck check_theta_fixed_point(const Vector& beta, const Matrix& x, const Vector& y,
                                        const PointwiseLoss& loss, const ThresholdRule& rule) {
  require(x.cols() == beta.size() && x.rows() == y.size(), "check_theta_fixed_point: shapes");
  const Vector arg = beta - x.transpose() * loss.gradient(x * beta, y);
  FixedPointCheck out;
  out.residual = (beta - threshold(rule, arg)).norm();
  for (double jump : threshold_discontinuities(rule)) {
    for (Index j = 0; j < arg.size(); ++j) {
      if (std::abs(std::abs(arg(j)) - jump) <= 1e-8) out.near_discontinuity = true;
    }
  }
  return out;
}

double check_quantile_fixed_point(const Vector& beta, const Matrix& x, const Vector& y,
                                  const PointwiseLoss& loss, Index q, double rho) {
  require(rho > 0, "rho must be positive");
  require(x.cols() == beta.size() && x.rows() == y.size(), "check_quantile_fixed_point: shapes");
  const Vector arg = beta - x.transpose() * loss.gradient(x * beta, y) / rho;
  return (beta - quantile_threshold(arg, q)).norm();
}

double check_rrr_fixed_point(const Matrix& b, const Matrix& x, const Matrix& y, Index r,
                             double rho) {
  require(rho > 0, "rho must be positive");
  require(b.rows() == x.cols() && b.cols() == y.cols() && x.rows() == y.rows(),
          "check_rrr_fixed_point: shapes");
  const Matrix arg = b - x.transpose() * (x * b - y) / rho;
  return (b - matrix_quantile_threshold(arg, r)).norm();
}

}  // namespace depthforge
