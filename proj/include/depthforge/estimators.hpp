#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "depthforge/influence.hpp"
#include "depthforge/solver.hpp"
#include "depthforge/threshold.hpp"

namespace depthforge {

struct FitResult {
  Matrix parameter;  // p x 1 for coefficient vectors
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  double residual = 0.0;
  /// Tie at the quantile cut, small eigengap, or an argument near a jump of Theta.
  bool flagged = false;
  std::string note;

  Vector coefficients() const { return parameter.col(0); }
};

struct IterationOptions {
  int max_iters = 10000;
  double tol = 1e-10;
  std::optional<Vector> start;
};

/// Declared tolerance for fixed-point residuals of converged fits.
constexpr double kFixedPointTolerance = 1e-8;

/// Minimum-norm least squares X^+ Y.
FitResult fit_least_squares(const Matrix& x, const Matrix& y);

/// Closed-form reduced-rank regression (X^T X)^+ X^T Y V_r V_r^T.
FitResult fit_rrr(const Matrix& x, const Matrix& y, Index r);

/// Iterative thresholding on the rescaled design X / sqrt(rho); lambda is on
/// that scale. The returned coefficients are mapped back to the scale of X.
/// The default rho is 1.01 L ||X||_2^2.
FitResult fit_tisp(const Matrix& x, const Vector& y, const ThresholdRule& rule,
                   const PointwiseLoss& loss, std::optional<double> rho = std::nullopt,
                   const IterationOptions& options = {});

/// Iterative quantile thresholding beta <- Theta#(beta - X^T grad / rho; q).
FitResult fit_piq(const Matrix& x, const Vector& y, Index q, const PointwiseLoss& loss,
                  std::optional<double> rho = std::nullopt, const IterationOptions& options = {});

/// Draws candidate i >= 1; nullopt (or a ValidationError) marks it infeasible.
using Sampler = std::function<std::optional<Matrix>(Index, std::mt19937_64&)>;
using DepthFunction = std::function<DepthResult(const Matrix&)>;

struct DeepestResult {
  Matrix parameter;
  DepthResult depth;
  Index index = 0;  // 0 is the base parameter
  int evaluated = 0;
  int skipped = 0;
  std::vector<double> depths;  // normalized depth per evaluated candidate, NaN when skipped
};

/// Evaluates the base parameter and budget - 1 sampled candidates and returns
/// the deepest (ties go to the earliest candidate). Candidate i draws from a
/// generator seeded by (seed, i) only.
DeepestResult deepest_search(const DepthFunction& depth_fn, const Matrix& base,
                             const Sampler& sampler, int budget, std::uint64_t seed);

/// Perturbation scales relative to the parameter norm.
constexpr double kSamplerScales[3] = {0.01, 0.1, 0.5};

/// Candidates cycle through small, medium and large additive noise and a
/// refit on rows resampled with replacement; every candidate is truncated to
/// rank r.
Sampler rrr_sampler(const Matrix& x, const Matrix& y, const Matrix& base, Index r);

/// Same scheme for coefficient vectors with exactly q nonzeros; refits use
/// fit_piq and noisy candidates are projected by quantile thresholding.
Sampler sparse_sampler(const Matrix& x, const Vector& y, const Vector& base, Index q,
                       const PointwiseLoss& loss);

/// Same scheme for coefficient vectors with thresholding fits; noisy candidates
/// keep the sparsity pattern of the base.
Sampler theta_sampler(const Matrix& x, const Vector& y, const Vector& base,
                      const ThresholdRule& rule, const PointwiseLoss& loss,
                      std::optional<double> rho);

}  // namespace depthforge
