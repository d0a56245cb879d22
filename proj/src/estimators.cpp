#include "depthforge/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "depthforge/slacked.hpp"

namespace depthforge {

namespace {

double spectral_norm_sq(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> svd(x);
  const double s = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return s * s;
}

double resolve_rho(const Matrix& x, const PointwiseLoss& loss, std::optional<double> rho) {
  const double need = loss.lipschitz() * spectral_norm_sq(x);
  if (!rho) return default_rho(x, loss);
  require(std::isfinite(*rho) && *rho > 0, "rho must be positive");
  require(*rho >= need * (1.0 - 1e-12), "rho must be at least L ||X||_2^2 = " + std::to_string(need));
  return *rho;
}

void check_regression(const Matrix& x, Index rows, const char* who) {
  require(x.rows() >= 1, std::string(who) + ": no samples");
  require(x.rows() == rows, std::string(who) + ": X and response row counts differ");
  require(x.allFinite(), std::string(who) + ": X has non-finite entries");
}

Matrix as_column(const Vector& v) { return Matrix(v); }

Matrix gaussian_like(const Matrix& base, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix out(base.rows(), base.cols());
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng);
  return out;
}

double noise_scale(const Matrix& base, int kind) {
  const double size = static_cast<double>(std::max<Index>(base.size(), 1));
  return kSamplerScales[kind] * base.norm() / std::sqrt(size);
}

std::vector<Index> bootstrap_rows(Index n, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (Index& r : rows) r = pick(rng);
  return rows;
}

Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

FitResult fit_least_squares(const Matrix& x, const Matrix& y) {
  check_regression(x, y.rows(), "fit_least_squares");
  require(y.allFinite(), "fit_least_squares: response has non-finite entries");
  FitResult out;
  out.parameter = x.completeOrthogonalDecomposition().solve(y);
  if (!out.parameter.allFinite()) throw NumericError("least squares produced non-finite values");
  out.objective = 0.5 * (y - x * out.parameter).squaredNorm();
  out.residual = (x.transpose() * (x * out.parameter - y)).norm();
  if (!std::isfinite(out.objective) || !std::isfinite(out.residual)) {
    throw NumericError("least squares residual overflows");
  }
  out.converged = true;
  out.iterations = 1;
  return out;
}

FitResult fit_rrr(const Matrix& x, const Matrix& y, Index r) {
  check_regression(x, y.rows(), "fit_rrr");
  require(y.allFinite(), "fit_rrr: response has non-finite entries");
  const Index p = x.cols();
  const Index m = y.cols();
  const Index rank_x = certified_rank(x);
  require(r >= 1 && r <= std::min({p, m, rank_x}),
          "fit_rrr: rank must lie in [1, min(p, m, rank X)] = [1, " +
              std::to_string(std::min({p, m, rank_x})) + "]");
  const Matrix ls = x.completeOrthogonalDecomposition().solve(y);
  const Matrix fitted = x * ls;
  Eigen::SelfAdjointEigenSolver<Matrix> es(fitted.transpose() * fitted);
  if (es.info() != Eigen::Success) throw NumericError("fit_rrr: eigen decomposition failed");
  const Vector ev = es.eigenvalues().reverse();
  const Matrix vr = es.eigenvectors().rowwise().reverse().leftCols(r);
  FitResult out;
  out.parameter = ls * vr * vr.transpose();
  if (!out.parameter.allFinite()) throw NumericError("fit_rrr produced non-finite values");
  if (r < m && ev(0) > 0 && (ev(r - 1) - ev(r)) / ev(0) < 1e-8) {
    out.flagged = true;
    out.note = "near-degenerate eigengap at the rank cut";
  }
  out.objective = 0.5 * (y - x * out.parameter).squaredNorm();
  const double rho = 1.01 * spectral_norm_sq(x);
  out.residual = check_rrr_fixed_point(out.parameter, x, y, r, rho > 0 ? rho : 1.0);
  out.converged = out.residual < kFixedPointTolerance;
  out.iterations = 1;
  return out;
}

FitResult fit_tisp(const Matrix& x, const Vector& y, const ThresholdRule& rule,
                   const PointwiseLoss& loss, std::optional<double> rho_in,
                   const IterationOptions& options) {
  check_regression(x, y.size(), "fit_tisp");
  rule.validate();
  const double rho = resolve_rho(x, loss, rho_in);
  const double k = std::sqrt(rho);
  const Matrix xs = x / k;
  const Index p = x.cols();
  Vector beta = options.start ? Vector(*options.start * k) : Vector::Zero(p);
  require(beta.size() == p, "fit_tisp: start has the wrong length");

  auto objective = [&](const Vector& b) {
    double pen = 0.0;
    for (Index j = 0; j < p; ++j) pen += threshold_penalty(rule, b(j));
    return loss.total(xs * b, y) + pen;
  };
  FitResult out;
  double f = objective(beta);
  for (out.iterations = 1; out.iterations <= options.max_iters; ++out.iterations) {
    const Vector next = threshold(rule, Vector(beta - xs.transpose() * loss.gradient(xs * beta, y)));
    const double fn = objective(next);
    if (!std::isfinite(fn)) throw NumericError("fit_tisp: objective is not finite");
    if (fn > f + 1e-10 * std::max(1.0, std::abs(f))) {
      throw NumericError("fit_tisp: surrogate objective increased (" + std::to_string(f) + " -> " +
                         std::to_string(fn) + "); rho too small?");
    }
    const double step = (next - beta).norm();
    beta = next;
    f = fn;
    if (step <= options.tol * std::max(1.0, beta.norm()) && step < 1e-9) break;
  }
  out.iterations = std::min(out.iterations, options.max_iters);
  const FixedPointCheck check = check_theta_fixed_point(beta, xs, y, loss, rule);
  out.residual = check.residual;
  out.flagged = check.near_discontinuity;
  if (out.flagged) out.note = "argument within 1e-8 of a threshold jump";
  out.converged = out.residual < kFixedPointTolerance;
  out.objective = f;
  out.parameter = as_column(beta / k);
  return out;
}

FitResult fit_piq(const Matrix& x, const Vector& y, Index q, const PointwiseLoss& loss,
                  std::optional<double> rho_in, const IterationOptions& options) {
  check_regression(x, y.size(), "fit_piq");
  const Index p = x.cols();
  require(q >= 1 && q <= p, "fit_piq: q must lie in [1, p]");
  const double rho = resolve_rho(x, loss, rho_in);
  Vector beta = options.start ? *options.start : Vector::Zero(p);
  require(beta.size() == p, "fit_piq: start has the wrong length");

  auto argument = [&](const Vector& b) {
    return Vector(b - x.transpose() * loss.gradient(x * b, y) / rho);
  };
  FitResult out;
  std::deque<Vector> history;
  bool cycled = false;
  for (out.iterations = 1; out.iterations <= options.max_iters; ++out.iterations) {
    const Vector next = quantile_threshold(argument(beta), q);
    const double step = (next - beta).norm();
    for (std::size_t back = 0; back < history.size() && !cycled; ++back) {
      if (step > 0 && (next - history[history.size() - 1 - back]).norm() == 0.0) cycled = true;
    }
    history.push_back(beta);
    if (history.size() > 4) history.pop_front();
    if (cycled) {
      history.push_back(next);
      double best = std::numeric_limits<double>::infinity();
      for (const Vector& b : history) {
        const double f = loss.total(x * b, y);
        if (f < best) {
          best = f;
          beta = b;
        }
      }
      break;
    }
    beta = next;
    if (step <= options.tol * std::max(1.0, beta.norm()) && step < 1e-9) break;
  }
  out.iterations = std::min(out.iterations, options.max_iters);
  const Vector arg = argument(beta);
  Vector mags = arg.cwiseAbs();
  std::sort(mags.data(), mags.data() + mags.size(), std::greater<double>());
  if (q < p && mags(q - 1) > 0 && std::abs(mags(q - 1) - mags(q)) <= 1e-12 * mags(q - 1)) {
    out.flagged = true;
    out.note = "tie at the quantile cut";
  }
  if (cycled) out.note = "oscillation detected; best iterate returned";
  out.residual = check_quantile_fixed_point(beta, x, y, loss, q, rho);
  out.converged = !cycled && out.residual < kFixedPointTolerance;
  out.objective = loss.total(x * beta, y);
  out.parameter = as_column(beta);
  return out;
}

DeepestResult deepest_search(const DepthFunction& depth_fn, const Matrix& base,
                             const Sampler& sampler, int budget, std::uint64_t seed) {
  require(budget >= 1, "deepest_search: budget must be >= 1");
  const auto count = static_cast<std::size_t>(budget);
  std::vector<std::optional<Matrix>> candidates(count);
  std::vector<std::optional<DepthResult>> results(count);
  candidates[0] = base;
  for (std::size_t i = 1; i < count; ++i) {
    auto rng = make_stream(seed, i);
    try {
      candidates[i] = sampler(static_cast<Index>(i), rng);
    } catch (const ValidationError&) {
      candidates[i].reset();
    }
  }
  parallel_for(budget, default_thread_count(), [&](int i) {
    const auto idx = static_cast<std::size_t>(i);
    if (!candidates[idx]) return;
    try {
      results[idx] = depth_fn(*candidates[idx]);
    } catch (const ValidationError&) {
      results[idx].reset();
    }
  });
  DeepestResult out;
  bool found = false;
  for (std::size_t i = 0; i < count; ++i) {
    if (!results[i]) {
      ++out.skipped;
      out.depths.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    ++out.evaluated;
    out.depths.push_back(results[i]->normalized);
    if (!found || results[i]->normalized > out.depth.normalized) {
      found = true;
      out.depth = *results[i];
      out.parameter = *candidates[i];
      out.index = static_cast<Index>(i);
    }
  }
  if (!found) throw ValidationError("deepest_search: no feasible candidate");
  return out;
}

Sampler rrr_sampler(const Matrix& x, const Matrix& y, const Matrix& base, Index r) {
  return [x, y, base, r](Index i, std::mt19937_64& rng) -> std::optional<Matrix> {
    const int kind = static_cast<int>((i - 1) % 4);
    Matrix cand;
    if (kind < 3) {
      cand = base + gaussian_like(base, noise_scale(base, kind), rng);
    } else {
      const std::vector<Index> rows = bootstrap_rows(x.rows(), rng);
      cand = fit_rrr(take_rows(x, rows), take_rows(y, rows), r).parameter;
    }
    return matrix_quantile_threshold(cand, r);
  };
}

Sampler sparse_sampler(const Matrix& x, const Vector& y, const Vector& base, Index q,
                       const PointwiseLoss& loss) {
  return [x, y, base, q, loss](Index i, std::mt19937_64& rng) -> std::optional<Matrix> {
    const int kind = static_cast<int>((i - 1) % 4);
    if (kind < 3) {
      const Matrix noisy = as_column(base) + gaussian_like(as_column(base), noise_scale(base, kind), rng);
      return as_column(quantile_threshold(noisy.col(0), q));
    }
    const std::vector<Index> rows = bootstrap_rows(x.rows(), rng);
    const Matrix xb = take_rows(x, rows);
    const Matrix yb = take_rows(as_column(y), rows);
    const FitResult fit = fit_piq(xb, yb.col(0), q, loss);
    if ((fit.coefficients().array() != 0.0).count() != q) return std::nullopt;
    return fit.parameter;
  };
}

Sampler theta_sampler(const Matrix& x, const Vector& y, const Vector& base,
                      const ThresholdRule& rule, const PointwiseLoss& loss,
                      std::optional<double> rho) {
  return [x, y, base, rule, loss, rho](Index i, std::mt19937_64& rng) -> std::optional<Matrix> {
    const int kind = static_cast<int>((i - 1) % 4);
    if (kind < 3) {
      Matrix cand = as_column(base) + gaussian_like(as_column(base), noise_scale(base, kind), rng);
      for (Index j = 0; j < base.size(); ++j) {
        if (base(j) == 0.0) cand(j, 0) = 0.0;
      }
      return cand;
    }
    const std::vector<Index> rows = bootstrap_rows(x.rows(), rng);
    const Matrix xb = take_rows(x, rows);
    const Matrix yb = take_rows(as_column(y), rows);
    std::optional<double> rb;
    if (rho) rb = std::max(*rho, default_rho(xb, loss));
    return fit_tisp(xb, yb.col(0), rule, loss, rb).parameter;
  };
}

}  // namespace depthforge
