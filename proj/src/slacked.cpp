#include "depthforge/slacked.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace depthforge {

namespace {

Index count_nonzero(const Vector& b) { return (b.array() != 0.0).count(); }

std::vector<bool> support_mask(const Vector& b) {
  std::vector<bool> mask(static_cast<std::size_t>(b.size()));
  for (Index j = 0; j < b.size(); ++j) mask[static_cast<std::size_t>(j)] = b(j) != 0.0;
  return mask;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

struct RankSplit {
  Matrix left_perp;
  Matrix right_perp;
};

RankSplit rank_split(const Matrix& b0, Index r) {
  require(b0.allFinite(), "B0 has non-finite entries");
  Eigen::JacobiSVD<Matrix> svd(b0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericError("SVD of B0 failed");
  const Matrix p = svd.matrixU().leftCols(r);
  const Matrix q = svd.matrixV().leftCols(r);
  return {orthonormal_complement(p), orthonormal_complement(q)};
}

void require_regression_shapes(const Matrix& x, Index rows, Index coef, const char* who) {
  require(x.rows() >= 1, std::string(who) + ": no samples");
  require(x.rows() == rows, std::string(who) + ": X and response row counts differ");
  require(x.cols() == coef, std::string(who) + ": coefficient length must equal columns of X");
}

}  // namespace

Index certified_rank(const Matrix& b) {
  require(b.allFinite(), "matrix has non-finite entries");
  if (b.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(b);
  const Vector s = svd.singularValues();
  if (s(0) <= 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) / s(0) >= kRankTolerance) ++r;
  }
  return r;
}

double default_lambda(const Vector& residuals, Index p) {
  require(residuals.size() >= 1, "default_lambda: no residuals");
  require(p >= 1, "default_lambda: p must be >= 1");
  std::vector<double> r(residuals.data(), residuals.data() + residuals.size());
  const double med = median(r);
  for (double& v : r) v = std::abs(v - med);
  const double sigma = 1.4826 * median(r);
  const double n = static_cast<double>(residuals.size());
  return sigma * std::sqrt(2.0 * n * std::log(static_cast<double>(p)));
}

double default_rho(const Matrix& x, const PointwiseLoss& loss) {
  const double s = spectral_norm(x);
  const double rho = 1.01 * loss.lipschitz() * s * s;
  return rho > 0 ? rho : 1.0;
}

DepthProblem nonnegative_regression_problem(const Matrix& x, const Vector& y, const Vector& beta0) {
  require_regression_shapes(x, y.size(), beta0.size(), "nonnegative_regression_depth");
  require((beta0.array() >= 0.0).all(), "nonnegative regression needs beta0 >= 0 entrywise");
  InfluenceSet infl = regression_influence(x, y, beta0);
  const Index p = x.cols();
  return DepthProblem(std::move(infl), TangentBasis::identity(p),
                      SlackChannel::nonnegative(support_mask(beta0)));
}

DepthResult nonnegative_regression_depth(const Matrix& x, const Vector& y, const Vector& beta0,
                                         const SolverConfig& config) {
  return solve_depth(nonnegative_regression_problem(x, y, beta0), config);
}

DepthProblem theta_problem(const Matrix& x_in, const Vector& y, const Vector& beta_in,
                           const ThresholdRule& rule, const PointwiseLoss& loss,
                           std::optional<double> rho) {
  require_regression_shapes(x_in, y.size(), beta_in.size(), "theta_depth");
  rule.validate();
  Matrix x = x_in;
  Vector beta0 = beta_in;
  if (rho) {
    require(*rho > 0 && std::isfinite(*rho), "rho must be positive");
    const double k = std::sqrt(*rho);
    x /= k;
    beta0 *= k;
  }
  InfluenceSet infl = glm_influence(x, y, beta0, loss);
  const GammaVector gamma = gamma_vector(rule, beta0);
  infl.offset = gamma.values / static_cast<double>(x.rows());
  const Index p = x.cols();
  return DepthProblem(std::move(infl), TangentBasis::identity(p),
                      SlackChannel::box(support_mask(beta0), rule.lambda));
}

DepthResult theta_depth(const Matrix& x, const Vector& y, const Vector& beta0,
                        const ThresholdRule& rule, const PointwiseLoss& loss,
                        const SolverConfig& config, std::optional<double> rho) {
  return solve_depth(theta_problem(x, y, beta0, rule, loss, rho), config);
}

double theta_sharp_bound(const Matrix& x, const Vector& y, const Vector& beta0,
                         const PointwiseLoss& loss) {
  require_regression_shapes(x, y.size(), beta0.size(), "theta_sharp_bound");
  const Vector grad = x.transpose() * loss.gradient(x * beta0, y);
  double bound = 0.0;
  for (Index j = 0; j < beta0.size(); ++j) {
    if (beta0(j) == 0.0) bound = std::max(bound, std::abs(grad(j)));
  }
  return bound;
}

DepthProblem theta_sharp_problem(const Matrix& x, const Vector& y, const Vector& beta0, Index q,
                                 const PointwiseLoss& loss) {
  require_regression_shapes(x, y.size(), beta0.size(), "theta_sharp_depth");
  require(count_nonzero(beta0) == q,
          "theta_sharp_depth: beta0 must have exactly q = " + std::to_string(q) +
              " nonzero entries (found " + std::to_string(count_nonzero(beta0)) + ")");
  const double bound = theta_sharp_bound(x, y, beta0, loss);
  return DepthProblem(glm_influence(x, y, beta0, loss), TangentBasis::identity(x.cols()),
                      SlackChannel::box(support_mask(beta0), bound));
}

DepthResult theta_sharp_depth(const Matrix& x, const Vector& y, const Vector& beta0, Index q,
                              const PointwiseLoss& loss, const SolverConfig& config) {
  return solve_depth(theta_sharp_problem(x, y, beta0, q, loss), config);
}

double rrr_slack_bound(const Matrix& x, const Matrix& y, const Matrix& b0) {
  require_regression_shapes(x, y.rows(), b0.rows(), "rrr_slack_bound");
  require(b0.cols() == y.cols(), "rrr_slack_bound: B0 must be p x m");
  const Index r = certified_rank(b0);
  require(r >= 1, "rrr_slack_bound: B0 is numerically zero");
  const RankSplit split = rank_split(b0, r);
  if (split.left_perp.cols() == 0 || split.right_perp.cols() == 0) return 0.0;
  const Matrix grad = x.transpose() * (x * b0 - y);
  return spectral_norm(split.left_perp.transpose() * grad * split.right_perp);
}

DepthProblem rrr_problem(const Matrix& x, const Matrix& y, const Matrix& b0, Index r) {
  require_regression_shapes(x, y.rows(), b0.rows(), "rrr_depth");
  require(b0.cols() == y.cols(), "rrr_depth: B0 must be p x m");
  require(r >= 1 && r <= std::min(b0.rows(), b0.cols()), "rrr_depth: rank must lie in [1, min(p, m)]");
  const Index cert = certified_rank(b0);
  require(cert == r, "rrr_depth: B0 has certified rank " + std::to_string(cert) +
                         ", expected " + std::to_string(r));
  const RankSplit split = rank_split(b0, r);
  double bound = 0.0;
  if (split.left_perp.cols() > 0 && split.right_perp.cols() > 0) {
    const Matrix grad = x.transpose() * (x * b0 - y);
    bound = spectral_norm(split.left_perp.transpose() * grad * split.right_perp);
  }
  const Index d = b0.size();
  return DepthProblem(rrr_influence(x, y, b0), TangentBasis::identity(d),
                      SlackChannel::spectral(split.left_perp, split.right_perp, bound));
}

DepthResult rrr_depth(const Matrix& x, const Matrix& y, const Matrix& b0, Index r,
                      const SolverConfig& config) {
  return solve_depth(rrr_problem(x, y, b0, r), config);
}

double sparse_rrr_bound(const Matrix& x, const Matrix& y, const Matrix& a0,
                        const StiefelPoint& u0) {
  require_regression_shapes(x, y.rows(), a0.rows(), "sparse_rrr_bound");
  require(u0.rows() == y.cols() && a0.cols() == u0.cols(), "sparse_rrr_bound: shapes");
  const Vector grad = vec(x.transpose() * (x * a0 - y * u0.data()));
  const Vector a = vec(a0);
  double bound = 0.0;
  for (Index j = 0; j < a.size(); ++j) {
    if (a(j) == 0.0) bound = std::max(bound, std::abs(grad(j)));
  }
  return bound;
}

DepthProblem sparse_rrr_problem(const Matrix& x, const Matrix& y, const Matrix& a0,
                                const StiefelPoint& u0, Index q) {
  const Vector a = vec(a0);
  require(count_nonzero(a) == q, "sparse_rrr_depth: A0 must have exactly q = " +
                                     std::to_string(q) + " nonzero entries");
  RiemannianInfluence ri = sparse_rrr_influence(x, y, a0, u0);
  const Index head = u0.rows() * u0.cols();
  std::vector<bool> mask(static_cast<std::size_t>(head), true);
  const std::vector<bool> tail = support_mask(a);
  mask.insert(mask.end(), tail.begin(), tail.end());
  const double bound = sparse_rrr_bound(x, y, a0, u0);
  return DepthProblem(std::move(ri.influences), std::move(ri.directions),
                      SlackChannel::box(std::move(mask), bound));
}

DepthResult sparse_rrr_depth(const Matrix& x, const Matrix& y, const Matrix& a0,
                             const StiefelPoint& u0, Index q, const SolverConfig& config) {
  return solve_depth(sparse_rrr_problem(x, y, a0, u0, q), config);
}

}  // namespace depthforge
