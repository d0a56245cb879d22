#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "depthforge/influence_set.hpp"
#include "depthforge/manifold.hpp"
#include "depthforge/types.hpp"

namespace depthforge {

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

enum class SlackKind { box, nonnegative, spectral };

/// Slack variables entering every sample through the shared shift
/// sign * <v, embed(s)> / n.
///
///  - box:         s_j in [-bound, bound] on free coordinates, sign +1.
///  - nonnegative: s_j >= 0 (unbounded) on free coordinates, sign -1.
///  - spectral:    embed(L) = vec(left L right^T), ||L||_2 <= bound, sign +1.
///                 The ambient space is vec of a left.rows() x right.rows()
///                 matrix.
///
/// `equality_mask[j]` is true where s_j is forced to zero (box, nonnegative).
struct SlackChannel {
  SlackKind kind = SlackKind::box;
  std::vector<bool> equality_mask;
  double bound = 0.0;
  Matrix left;
  Matrix right;

  static SlackChannel box(std::vector<bool> equality_mask, double bound);
  static SlackChannel nonnegative(std::vector<bool> equality_mask);
  static SlackChannel spectral(Matrix left, Matrix right, double bound);

  /// True when the channel cannot move the shift for any direction.
  bool inert() const;
  void validate(Index ambient_dim) const;
  std::vector<Index> free_coordinates() const;
  std::string describe() const;
};

/// A concrete slack assignment: `s` (ambient length) for box/nonnegative,
/// `l` for spectral.
struct SlackValue {
  Vector s;
  Matrix l;
};

enum class Indicator {
  closed,     // 1{t >= 0}
  half_open,  // 0.5 1{t = 0} + 1{t > 0}
};

struct DepthProblem {
  InfluenceSet influences;
  TangentBasis directions;
  std::optional<SlackChannel> slack;
  Indicator indicator = Indicator::closed;

  DepthProblem(InfluenceSet influences, TangentBasis directions,
               std::optional<SlackChannel> slack = std::nullopt,
               Indicator indicator = Indicator::closed);
  /// Unconstrained directions in R^d.
  static DepthProblem plain(InfluenceSet influences);

  Index samples() const { return influences.samples(); }
  void validate() const;
};

enum class Surrogate { sigmoid, smooth_ramp };

struct SolverConfig {
  int restarts = 64;
  Surrogate surrogate = Surrogate::sigmoid;
  double bandwidth_start = 1.0;
  double bandwidth_end = 1e-3;
  int stages = 8;
  int max_iters = 200;
  double initial_step = 1.0;
  double shrink = 0.5;
  std::uint64_t seed = 1;
  double zero_tol = 1e-12;
  /// Upper bound on pair-based seed directions.
  int pair_seed_cap = 256;
  /// 0 = DEPTHFORGE_THREADS or hardware concurrency.
  int threads = 0;
  /// Extra ambient starting directions (projected onto the direction space).
  std::vector<Vector> hints;

  void validate() const;
  std::vector<double> bandwidths() const;
};

enum class Certificate { exact_oracle, heuristic_upper_bound };

std::string to_string(Certificate c);

struct SolverDiagnostics {
  Index ambient_dim = 0;
  Index reduced_dim = 0;
  int restarts_used = 0;
  double final_bandwidth = 0.0;
  std::size_t evaluations = 0;
};

struct DepthResult {
  /// Criterion value: the integer count for order-1 depths (half-integers
  /// under the half-open indicator), the product for order-2 depths.
  double value = 0.0;
  double normalized = 0.0;
  Index samples = 0;
  Vector direction;
  std::optional<SlackValue> slack;
  /// Total shared shift at the optimum: <v, offset> plus the slack term.
  double shift = 0.0;
  Certificate certificate = Certificate::heuristic_upper_bound;
  SolverDiagnostics diagnostics;

  long long count() const;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Sum of indicators of <v, T_i> + <v, offset> + slack shift. `v` must be a
/// unit vector in the direction space and `s` feasible for the channel.
double evaluate_01(const DepthProblem& problem, const Vector& v,
                   const std::optional<SlackValue>& s = std::nullopt, double zero_tol = 1e-12);

/// Exact planar halfspace depth of points in R^2 (zero points always count).
long long exact_depth_2d(const Matrix& points, double zero_tol = 1e-12);

/// Same, also returning a minimizing unit direction.
std::pair<long long, Vector> exact_depth_2d_argmin(const Matrix& points, double zero_tol = 1e-12);

struct SlackStep {
  SlackValue slack;
  /// Slack contribution sign * <v, embed(s)> / n (excludes the offset).
  double shift = 0.0;
};

/// Optimal 0-1 slack for a fixed direction. The count is nondecreasing in the
/// shift, so the minimum of the achievable shift interval is optimal.
SlackStep slack_step_01(const DepthProblem& problem, const Vector& v);

/// Slack minimizing the smoothed criterion at `bandwidth` for a fixed
/// direction. The surrogate is increasing in the shift, so the minimizer is
/// the minimal-shift slack for every bandwidth and start; `start`, when
/// given, is only checked for feasibility.
SlackValue slack_step_smooth(const DepthProblem& problem, const Vector& v, double bandwidth,
                             const SolverConfig& config,
                             const std::optional<SlackValue>& start = std::nullopt);

/// Minimizes the 0-1 criterion over unit directions in the direction space
/// and over feasible slack.
DepthResult solve_depth(const DepthProblem& problem, const SolverConfig& config = {});

/// Smoothed criterion sum_i phi(margin_i / (nu_i h)) in reduced coordinates
/// w (the direction is basis * w). Exposed for gradient checks.
class SmoothedObjective {
 public:
  SmoothedObjective(const DepthProblem& problem, Surrogate surrogate);

  Index reduced_dim() const;
  const Matrix& basis() const;
  double value(const Vector& w, const SlackValue& s, double bandwidth) const;
  Vector gradient_direction(const Vector& w, const SlackValue& s, double bandwidth) const;
  SlackValue gradient_slack(const Vector& w, const SlackValue& s, double bandwidth) const;
  SlackValue zero_slack() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

// ---------------------------------------------------------------------------
// Order-2 criterion
// ---------------------------------------------------------------------------

enum class OrderTwoCriterion {
  product,     // (sum_i 1~(g_i)) (sum_i 1{h_i >= 0})
  aggressive,  // sum_i 1~(g_i) 1{h_i >= 0}
};

/// Second derivatives h_i as a function of the direction. When quadratic
/// forms are given, h_i(v) = v^T H_i v and planar problems are solved exactly.
struct SecondOrderTerms {
  std::vector<Matrix> quadratic_forms;
  std::function<Vector(const Vector&)> evaluate;

  Vector at(const Vector& v) const;
};

struct OrderTwoProblem {
  InfluenceSet first_order;  // g_i = <v, T_i>
  TangentBasis directions;
  SecondOrderTerms second_order;
  OrderTwoCriterion criterion = OrderTwoCriterion::product;
};

double evaluate_order2(const OrderTwoProblem& problem, const Vector& v, double zero_tol = 1e-12);

DepthResult order2_depth(const OrderTwoProblem& problem, const SolverConfig& config = {});

/// Number of worker threads: hardware concurrency, capped by DEPTHFORGE_THREADS.
int default_thread_count();

/// Runs body(0..count-1) on up to `threads` workers; rethrows the first error.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

/// Generator for stream `stream` of a seeded family; depends on (seed, stream) only.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

}  // namespace depthforge
