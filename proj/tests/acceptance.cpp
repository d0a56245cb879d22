// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "depthforge/cli.hpp"
#include "depthforge/estimators.hpp"
#include "depthforge/influence.hpp"
#include "depthforge/io.hpp"
#include "depthforge/riemannian.hpp"
#include "depthforge/slacked.hpp"
#include "depthforge/threshold.hpp"
#include "test_support.hpp"

using namespace depthforge;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

long long plain_count(const InfluenceSet& t) { return solve_depth(DepthProblem::plain(t)).count(); }

Vector sparse_vector(Index p, Index q, std::mt19937_64& rng) {
  std::vector<Index> idx(p);
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  Vector b = Vector::Zero(p);
  std::normal_distribution<double> nd;
  for (Index j = 0; j < q; ++j) {
    double v = nd(rng);
    while (std::abs(v) < 0.1) v = nd(rng);
    b(idx[j]) = v;
  }
  return b;
}

Matrix low_rank(Index p, Index m, Index r, std::mt19937_64& rng) {
  return gaussian(p, r, rng) * gaussian(r, m, rng);
}

double spectral_sq(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> svd(x);
  const double s = svd.singularValues()(0);
  return s * s;
}

// Orthonormal completion of mu; the last m-1 columns span its tangent space.
Matrix tangent_frame(const Vector& mu) {
  Eigen::HouseholderQR<Matrix> qr(mu);
  const Matrix full = qr.householderQ() * Matrix::Identity(mu.size(), mu.size());
  return full.rightCols(mu.size() - 1);
}

// Exhaustive depth of coordinates in R^1 or R^2.
long long exhaustive_low_dim(const Matrix& coords) {
  if (coords.cols() == 1) return oracle_line_depth(coords.col(0));
  return oracle_planar_depth(coords);
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  int agree = 0, total = 0, grid_agree = 0, planar = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int kind = trial % 4;
    const Index n = 3 + trial % 37;
    long long solver = 0, oracle = 0;
    Matrix coords;
    if (kind == 0) {
      const Index d = 1 + (trial / 4) % 2;
      const Matrix z = gaussian(n, d, rng);
      const Vector mu = gaussian_vector(d, rng, 0.5);
      coords = location_influence(z, mu).rows;
      solver = solve_depth(DepthProblem::plain(location_influence(z, mu))).count();
    } else if (kind == 1) {
      const Matrix x = gaussian(n, 2, rng);
      const Vector beta = gaussian_vector(2, rng);
      const Vector y = x * beta + gaussian_vector(n, rng);
      const Vector b0 = beta + gaussian_vector(2, rng, 0.3);
      coords = regression_influence(x, y, b0).rows;
      solver = solve_depth(DepthProblem::plain(regression_influence(x, y, b0))).count();
    } else {
      const Index m = 2 + (trial / 4) % 2;
      const Matrix z = sphere_sample(n, m, rng);
      const Vector mu = random_unit(m, rng);
      const Matrix frame = tangent_frame(mu);
      if (kind == 2) {
        coords = z * frame;
        solver = vmf_depth(z, UnitVector(mu)).count();
      } else {
        // <z, mu> (z - <z, mu> mu) in tangent coordinates.
        coords = (z * mu).asDiagonal() * (z * frame);
        solver = watson_depth(z, UnitVector(mu)).count();
      }
    }
    oracle = exhaustive_low_dim(coords);
    bool ok = solver == oracle;
    if (coords.cols() == 2) {
      ok = ok && exact_depth_2d(coords) == oracle;
      ++planar;
      grid_agree += grid_planar_depth(coords, 3600) == oracle;
    }
    agree += ok;
    ++total;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = agree == total && secs < 60.0;
  o.detail = std::to_string(agree) + "/" + std::to_string(total) + " exact matches; 3600-angle grid agrees on " +
             std::to_string(grid_agree) + "/" + std::to_string(planar) + " planar instances; " + fmt(secs, 1) +
             " s";
  return o;
}

Outcome slack_grid_oracle() {
  std::mt19937_64 rng(202);
  int grid_match = 0, vertex_match = 0;
  std::string misses;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 6 + trial % 7;
    const Matrix x = gaussian(n, 3, rng);
    const Vector y = gaussian_vector(n, rng);
    const Vector beta = sparse_vector(3, 1, rng);
    const PointwiseLoss loss;
    const DepthResult res = theta_sharp_depth(x, y, beta, 1, loss);
    const long long solver = res.count();
    std::vector<Index> free;
    for (Index j = 0; j < 3; ++j)
      if (beta(j) == 0.0) free.push_back(j);
    const double bound = theta_sharp_bound(x, y, beta, loss);
    const Matrix t = glm_influence(x, y, beta, loss).rows;
    const long long grid = grid_box_slack_depth(t, free, bound, 3600, 41);
    const long long vertex = vertex_box_slack_depth(t, free, bound);
    grid_match += solver == grid;
    vertex_match += solver == vertex;
    if (solver != grid) {
      // Recount the solver's witness independently: direction plus its slack shift.
      double shift = 0.0;
      if (res.slack)
        for (Index j : free) shift += res.direction(j) * res.slack->s(j);
      const long long witness = count_closed(t, res.direction, shift / static_cast<double>(n));
      misses += " [trial " + std::to_string(trial) + ": solver " + std::to_string(solver) + ", grid " +
                std::to_string(grid) + ", exact " + std::to_string(vertex) + ", witness recount " +
                std::to_string(witness) + "]";
    }
  }
  Outcome o;
  o.pass = grid_match == 50;
  o.detail = std::to_string(grid_match) + "/50 equal the 3600x41 grid; " + std::to_string(vertex_match) +
             "/50 equal the exact arrangement oracle" + misses;
  return o;
}

Outcome reduction_identities() {
  std::mt19937_64 rng(303);
  int rrr_ok = 0, nonneg_ok = 0, theta_ok = 0, sharp_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index p = 1 + trial % 3, m = 1 + (trial / 3) % 2;
    const Matrix x = gaussian(8 + trial % 6, p, rng);
    const Matrix y = gaussian(x.rows(), m, rng);
    const Matrix b = gaussian(p, m, rng);
    rrr_ok += rrr_depth(x, y, b, std::min(p, m)).count() == plain_count(rrr_influence(x, y, b));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Index p = 1 + trial % 4;
    const Matrix x = gaussian(10 + trial % 8, p, rng);
    const Vector y = gaussian_vector(x.rows(), rng);
    const Vector beta = gaussian_vector(p, rng).cwiseAbs().array() + 0.05;
    nonneg_ok += nonnegative_regression_depth(x, y, beta).count() == plain_count(regression_influence(x, y, beta));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Index p = 1 + trial % 4;
    const Matrix x = gaussian(8 + trial % 9, p, rng);
    const Vector y = gaussian_vector(x.rows(), rng);
    const Vector beta = sparse_vector(p, 1 + trial % p, rng);
    const PointwiseLoss loss(trial % 3 == 0 ? PointwiseLoss::Kind::huber : PointwiseLoss::Kind::squared);
    const ThresholdRule rules[] = {ThresholdRule::soft(0.0), ThresholdRule::hard(0.0), ThresholdRule::scad(0.0),
                                   ThresholdRule::mcp(0.0)};
    theta_ok += theta_depth(x, y, beta, rules[trial % 4], loss).count() == plain_count(glm_influence(x, y, beta, loss));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Index p = 1 + trial % 4;
    const Matrix x = gaussian(9 + trial % 7, p, rng);
    const Vector y = gaussian_vector(x.rows(), rng);
    const Vector beta = sparse_vector(p, p, rng);
    const PointwiseLoss loss;
    sharp_ok += theta_sharp_depth(x, y, beta, p, loss).count() == plain_count(glm_influence(x, y, beta, loss));
  }
  Outcome o;
  o.pass = rrr_ok == 100 && nonneg_ok == 100 && theta_ok == 100 && sharp_ok == 100;
  o.detail = "rrr full rank " + std::to_string(rrr_ok) + "/100, nonnegative interior " + std::to_string(nonneg_ok) +
             "/100, theta lambda=0 " + std::to_string(theta_ok) + "/100, theta_sharp q=p " +
             std::to_string(sharp_ok) + "/100";
  return o;
}

Outcome fixed_point_residuals() {
  std::mt19937_64 rng(404);
  double worst_rrr = 0.0;
  int rrr_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index p = 2 + trial % 5, m = 2 + (trial / 5) % 4;
    const Index n = p + 3 + trial % 20;
    const Index r = 1 + trial % std::min(p, m);
    const Matrix x = gaussian(n, p, rng);
    const Matrix y = x * low_rank(p, m, r, rng) + gaussian(n, m, rng);
    const FitResult f = fit_rrr(x, y, r);
    const double res = check_rrr_fixed_point(f.parameter, x, y, r, 1.01 * spectral_sq(x));
    worst_rrr = std::max(worst_rrr, res);
    rrr_ok += res < 1e-8;
  }
  int converged = 0, tisp_ok = 0, fits = 0;
  double worst_tisp = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index p = 3 + trial % 5;
    const Matrix x = gaussian(40, p, rng);
    const Vector y = x * sparse_vector(p, 2, rng) + gaussian_vector(40, rng);
    const double lambda = 0.5 + 0.25 * (trial % 4);
    const ThresholdRule rules[] = {ThresholdRule::soft(lambda), ThresholdRule::hard(lambda),
                                   ThresholdRule::scad(lambda), ThresholdRule::mcp(lambda)};
    const PointwiseLoss loss(trial % 2 ? PointwiseLoss::Kind::huber : PointwiseLoss::Kind::squared);
    for (const ThresholdRule& rule : rules) {
      ++fits;
      const FitResult f = fit_tisp(x, y, rule, loss);
      if (!f.converged) continue;
      ++converged;
      const double rho = default_rho(x, loss);
      const double res =
          check_theta_fixed_point(f.coefficients() * std::sqrt(rho), x / std::sqrt(rho), y, loss, rule).residual;
      worst_tisp = std::max(worst_tisp, res);
      tisp_ok += res < 1e-8;
    }
  }
  Outcome o;
  o.pass = rrr_ok == 100 && converged > 0 && tisp_ok == converged;
  std::ostringstream d;
  d << "fit_rrr " << rrr_ok << "/100 (max " << worst_rrr << "); fit_tisp " << tisp_ok << "/" << converged
    << " converged of " << fits << " (max " << worst_tisp << ")";
  o.detail = d.str();
  return o;
}

// Problem with rows, offset and slack bound multiplied by c.
DepthProblem scaled(const DepthProblem& p, double c) {
  InfluenceSet inf(p.influences.rows * c);
  if (p.influences.offset) inf.offset = *p.influences.offset * c;
  std::optional<SlackChannel> slack = p.slack;
  if (slack) slack->bound *= c;
  return DepthProblem(inf, p.directions, slack, p.indicator);
}

Outcome invariance_suite() {
  std::mt19937_64 rng(505);
  int scale_ok = 0, scale_total = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const double c = std::exp(std::uniform_real_distribution<double>(-5.0, 5.0)(rng));
    DepthProblem prob = DepthProblem::plain(InfluenceSet(gaussian(12, 3, rng)));
    const Matrix x = gaussian(14, 3, rng);
    const Vector y = gaussian_vector(14, rng);
    switch (trial % 4) {
      case 1: prob = theta_problem(x, y, sparse_vector(3, 2, rng), ThresholdRule::soft(0.6), PointwiseLoss()); break;
      case 2: prob = rrr_problem(x, gaussian(14, 2, rng), low_rank(3, 2, 1, rng), 1); break;
      case 3: {
        const Vector mu = random_unit(4, rng);
        const RiemannianInfluence ri = vmf_influence(sphere_sample(12, 4, rng), UnitVector(mu));
        prob = DepthProblem(ri.influences, ri.directions);
        break;
      }
      default: break;
    }
    bool ok = solve_depth(prob).count() == solve_depth(scaled(prob, c)).count();
    const Matrix basis = prob.directions.basis();
    for (int k = 0; k < 20; ++k) {
      const Vector v = basis * random_unit(basis.cols(), rng);
      ok = ok && evaluate_01(prob, v) == evaluate_01(scaled(prob, c), v);
    }
    scale_ok += ok;
    ++scale_total;
  }

  int rot_ok = 0, rot_total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index m = 2 + trial % 3;
    const Matrix rot = random_rotation(m, rng);
    const Matrix z = sphere_sample(14, m, rng);
    const Vector mu = random_unit(m, rng);
    const Matrix zr = z * rot.transpose();
    const UnitVector c(mu), cr = UnitVector::normalized(rot * mu);
    rot_ok += watson_depth(z, c).count() == watson_depth(zr, cr).count();
    rot_ok += vmf_depth(z, c).count() == vmf_depth(zr, cr).count();
    const Matrix w = gaussian(12, 3, rng);
    const Matrix rot3 = random_rotation(3, rng);
    const Matrix wr = w * rot3.transpose();
    const Vector center = gaussian_vector(3, rng, 0.3);
    const Matrix u = random_stiefel(3, 1, rng);
    rot_ok += pc_depth(w, center, StiefelPoint(u)).count() ==
              pc_depth(wr, Vector(rot3 * center), StiefelPoint::orthonormalized(rot3 * u)).count();
    Vector mb(1);
    mb << 0.2;
    rot_ok += oc_depth(w, mb, StiefelPoint(u)).count() ==
              oc_depth(wr, mb, StiefelPoint::orthonormalized(rot3 * u)).count();
    rot_total += 4;
  }

  int anti_ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index m = 2 + trial % 3;
    const Matrix z = sphere_sample(12, m, rng);
    const Vector mu = random_unit(m, rng);
    anti_ok += watson_depth(z, UnitVector(mu)).count() == watson_depth(z, UnitVector(Vector(-mu))).count();
  }

  // The hard rule has no offset, so lambda enters only as the slack radius.
  int mono_ok = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const Index p = 2 + inst % 2;
    const Matrix x = gaussian(14, p, rng);
    const Vector y = gaussian_vector(14, rng);
    const Vector beta = sparse_vector(p, 1, rng);
    for (int grid = 0; grid < 20; ++grid) {
      std::vector<double> lambdas(5);
      for (double& l : lambdas) l = std::exponential_distribution<double>(0.5)(rng);
      std::sort(lambdas.begin(), lambdas.end());
      long long prev = x.rows();
      bool ok = true;
      for (double l : lambdas) {
        const long long d = theta_depth(x, y, beta, ThresholdRule::hard(l), PointwiseLoss()).count();
        ok = ok && d <= prev;
        prev = d;
      }
      mono_ok += ok;
    }
  }
  Outcome o;
  o.pass = scale_ok == scale_total && rot_ok == rot_total && anti_ok == 50 && mono_ok == 400;
  o.detail = "scaling " + std::to_string(scale_ok) + "/" + std::to_string(scale_total) + ", rotation " +
             std::to_string(rot_ok) + "/" + std::to_string(rot_total) + ", Watson antipodal " +
             std::to_string(anti_ok) + "/50, lambda monotone " + std::to_string(mono_ok) + "/400 grids";
  return o;
}

Outcome order_two_consistency() {
  std::mt19937_64 rng(606);
  int ok = 0, total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // vMF with every point in the hemisphere of mu.
    const Index m = 2 + trial % 2;
    const Vector mu = random_unit(m, rng);
    Matrix z = sphere_sample(10, m, rng);
    for (Index i = 0; i < z.rows(); ++i)
      if (z.row(i).dot(mu) <= 0) z.row(i) *= -1.0;
    const RiemannianInfluence ri = vmf_influence(z, UnitVector(mu));
    const DepthResult one = solve_depth(DepthProblem(ri.influences, ri.directions, std::nullopt, Indicator::half_open));
    ok += vmf_order2_depth(z, UnitVector(mu)).value == 10.0 * one.value;
    ++total;
  }
  for (int trial = 0; trial < 20; ++trial) {
    // Generic problem with positive definite curvature forms.
    const Index n = 9;
    const Matrix g = gaussian(n, 2, rng);
    OrderTwoProblem p{InfluenceSet(g), TangentBasis::identity(2), {}, OrderTwoCriterion::product};
    for (Index i = 0; i < n; ++i) {
      const Matrix a = gaussian(2, 2, rng);
      p.second_order.quadratic_forms.push_back(a * a.transpose() + 0.1 * Matrix::Identity(2, 2));
    }
    const DepthResult one = solve_depth(DepthProblem(InfluenceSet(g), TangentBasis::identity(2), std::nullopt,
                                                     Indicator::half_open));
    ok += order2_depth(p).value == n * one.value;
    ++total;
  }
  int fact_ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index m = 2 + trial % 2;
    const Matrix z = sphere_sample(5 + trial % 15, m, rng);
    const UnitVector mu(random_unit(m, rng));
    fact_ok += vmf_order2_depth(z, mu).value == vmf_order2_depth_factorized(z, mu).value;
  }
  Outcome o;
  o.pass = ok == total && fact_ok == 50;
  o.detail = "nonnegative curvature " + std::to_string(ok) + "/" + std::to_string(total) +
             ", vMF factorization " + std::to_string(fact_ok) + "/50";
  return o;
}

Outcome gradient_checks() {
  std::mt19937_64 rng(707);
  double worst = 0.0;
  int ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 2 + trial % 4;
    const Matrix t = gaussian(12, d, rng);
    std::vector<bool> mask(d, false);
    mask[0] = true;
    std::optional<SlackChannel> slack;
    if (trial % 3 == 1) slack = SlackChannel::box(mask, 0.7);
    if (trial % 3 == 2 && d >= 3) slack = SlackChannel::spectral(random_stiefel(d, 2, rng), Matrix::Ones(1, 1), 0.4);
    const DepthProblem p(InfluenceSet(t, gaussian_vector(d, rng, 0.1)), TangentBasis::identity(d), slack);
    const SmoothedObjective obj(p, trial % 2 ? Surrogate::sigmoid : Surrogate::smooth_ramp);
    const Vector w = random_unit(obj.reduced_dim(), rng);
    SlackValue s = obj.zero_slack();
    if (s.s.size())
      for (Index j = 0; j < d; ++j)
        if (!mask[j]) s.s(j) = 0.3 * std::sin(j + trial);
    if (s.l.size()) s.l.setConstant(0.1);
    const double h = 0.7, eps = 1e-6;
    double err = 0.0;
    // Relative error, with unit floor on the scale for near-zero derivatives.
    auto rel = [](double an, double fd) { return std::abs(an - fd) / std::max(1.0, std::abs(fd)); };
    const Vector gw = obj.gradient_direction(w, s, h);
    for (Index j = 0; j < w.size(); ++j) {
      Vector wp = w, wm = w;
      wp(j) += eps;
      wm(j) -= eps;
      err = std::max(err, rel(gw(j), (obj.value(wp, s, h) - obj.value(wm, s, h)) / (2 * eps)));
    }
    const SlackValue gs = obj.gradient_slack(w, s, h);
    auto perturb = [](SlackValue base, Index k, double e) {
      if (base.l.size()) base.l(k) += e;
      else base.s(k) += e;
      return base;
    };
    const Index slots = s.l.size() ? s.l.size() : s.s.size();
    for (Index k = 0; k < slots; ++k) {
      if (!s.l.size() && mask[k]) continue;
      const double fd = (obj.value(w, perturb(s, k, eps), h) - obj.value(w, perturb(s, k, -eps), h)) / (2 * eps);
      err = std::max(err, rel(s.l.size() ? gs.l(k) : gs.s(k), fd));
    }
    worst = std::max(worst, err);
    ok += err < 1e-5;
  }
  Outcome o;
  o.pass = ok == 50;
  std::ostringstream d;
  d << ok << "/50 problems, max relative error " << worst;
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------

Outcome var_outlier_analog() {
  const auto t0 = Clock::now();
  const Index m = 9, weeks = 52, r = 6, outlier_week = 17, outlier_series = 0;
  int deeper = 0, sign_deepest = 0, sign_plain = 0;
  std::ostringstream depths;
  for (int rep = 0; rep < 20; ++rep) {
    std::mt19937_64 rng(8000 + rep);
    Vector sv(r);
    for (Index k = 0; k < r; ++k) sv(k) = std::uniform_real_distribution<double>(0.3, 0.9)(rng);
    const Matrix b = random_stiefel(m, r, rng) * sv.asDiagonal() * random_stiefel(m, r, rng).transpose();
    // Row form y_t = y_{t-1} B + e_t after a burn-in.
    Vector state = gaussian_vector(m, rng);
    for (int t = 0; t < 50; ++t) state = b.transpose() * state + gaussian_vector(m, rng);
    Matrix series(weeks, m);
    for (Index t = 0; t < weeks; ++t) {
      state = b.transpose() * state + gaussian_vector(m, rng);
      series.row(t) = state.transpose();
    }
    Matrix dirty = series;
    dirty(outlier_week, outlier_series) += 12.0;
    const Matrix xc = series.topRows(weeks - 1), yc = series.bottomRows(weeks - 1);
    const Matrix xo = dirty.topRows(weeks - 1), yo = dirty.bottomRows(weeks - 1);

    const Matrix clean = fit_rrr(xc, yc, r).parameter;
    const Matrix plain = fit_rrr(xo, yo, r).parameter;
    const DepthResult plain_depth = rrr_depth(xo, yo, plain, r);
    const DeepestResult best = deepest_search([&](const Matrix& cand) { return rrr_depth(xo, yo, cand, r); },
                                              plain, rrr_sampler(xo, yo, plain, r), 500, 9000 + rep);
    deeper += best.depth.normalized > plain_depth.normalized;
    // Key slope: the lagged outlier series' strongest effect in the clean fit.
    Index col = 0;
    clean.row(outlier_series).cwiseAbs().maxCoeff(&col);
    const double key = clean(outlier_series, col);
    sign_deepest += (best.parameter(outlier_series, col) > 0) == (key > 0);
    sign_plain += (plain(outlier_series, col) > 0) == (key > 0);
    depths << (rep ? " " : "") << fmt(plain_depth.normalized, 2) << "->" << fmt(best.depth.normalized, 2);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = deeper >= 18 && sign_deepest >= 15 && secs < 600.0;
  o.detail = "deeper than RRR in " + std::to_string(deeper) + "/20, key slope sign matches clean fit in " +
             std::to_string(sign_deepest) + "/20 (plain RRR " + std::to_string(sign_plain) + "/20), " +
             fmt(secs, 1) + " s; normalized depths plain->deepest: " + depths.str();
  return o;
}

// Thresholding fit with exactly q nonzeros: bisection on the soft-rule
// lambda, falling back to keeping the q largest entries of the nearest
// denser fit.
Vector fit_with_support(const Matrix& x, const Vector& y, const PointwiseLoss& loss, Index q) {
  const double rho = default_rho(x, loss);
  const Vector g0 = x.transpose() * loss.gradient(Vector::Zero(x.rows()), y) / std::sqrt(rho);
  double lo = 0.0, hi = g0.cwiseAbs().maxCoeff() * 1.01;
  Vector denser = fit_tisp(x, y, ThresholdRule::soft(lo), loss).coefficients();
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vector b = fit_tisp(x, y, ThresholdRule::soft(mid), loss).coefficients();
    const Index k = (b.array() != 0.0).count();
    if (k == q) return b;
    if (k > q) {
      lo = mid;
      denser = b;
    } else {
      hi = mid;
    }
  }
  return quantile_threshold(denser, q);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("depthforge_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string csv_text(const Matrix& m) {
  std::string s;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) s += (j ? "," : "") + format_number(m(i, j));
    s += "\n";
  }
  return s;
}

int cli(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::ostringstream out, e;
  const int code = run_cli(args, out, e);
  if (err) *err = e.str();
  return code;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Outcome sparse_ranking_analog() {
  const auto t0 = Clock::now();
  TempDir dir;
  const Index n = 250, p = 13;
  std::mt19937_64 rng(9090);
  const Matrix x = gaussian(n, p, rng);
  Vector beta = Vector::Zero(p);
  // Six true predictors, so every q in 7..10 can hold the whole support.
  for (Index j = 0; j < 6; ++j) beta(j) = (j % 2 ? -1.0 : 1.0) * (0.5 + 0.25 * j);
  // Student t with 1.5 degrees of freedom.
  std::student_t_distribution<double> noise(1.5);
  Vector y = x * beta;
  for (Index i = 0; i < n; ++i) y(i) += noise(rng);

  const PointwiseLoss huber(PointwiseLoss::Kind::huber), squared;
  std::ostringstream detail;
  bool pass = true;
  std::string err;
  for (Index q = 7; q <= 10; ++q) {
    std::vector<double> dh, ds;
    int huber_wins = 0;
    for (int split = 0; split < 20; ++split) {
      std::mt19937_64 srng(100 * q + split);
      std::vector<Index> perm(n);
      std::iota(perm.begin(), perm.end(), Index{0});
      std::shuffle(perm.begin(), perm.end(), srng);
      const Index half = n / 2;
      Matrix xa(half, p), xb(n - half, p);
      Vector ya(half), yb(n - half);
      for (Index i = 0; i < n; ++i) {
        if (i < half) {
          xa.row(i) = x.row(perm[i]);
          ya(i) = y(perm[i]);
        } else {
          xb.row(i - half) = x.row(perm[i]);
          yb(i - half) = y(perm[i]);
        }
      }
      write_text_file(dir.file("x.csv"), csv_text(xb));
      write_text_file(dir.file("y.csv"), csv_text(yb));
      write_text_file(dir.file("huber.csv"), format_parameter(fit_with_support(xa, ya, huber, q)));
      write_text_file(dir.file("squared.csv"), format_parameter(fit_with_support(xa, ya, squared, q)));
      const int code = cli({"rank", "--family", "theta_sharp", "--q", std::to_string(q), "--data", dir.file("x.csv"),
                            "--response", dir.file("y.csv"), "--param", dir.file("huber.csv"), "--param",
                            dir.file("squared.csv"), "--seed", std::to_string(split + 1), "--out",
                            dir.file("rank.csv")},
                           &err);
      if (code != 0) return {false, "rank failed: " + err};
      // Body rows: rank,candidate,param,depth,normalized,certificate.
      std::istringstream is(read_text_file(dir.file("rank.csv")));
      std::string line;
      double h = 0.0, s = 0.0;
      int row = 0;
      std::string first;
      while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("rank,", 0) == 0) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        const double value = std::stod(cells[4]);
        if (cells[1] == "1") h = value;
        else s = value;
        if (row++ == 0) first = cells[1];
      }
      dh.push_back(h);
      ds.push_back(s);
      huber_wins += first == "1" && h > s;
    }
    const double mh = median(dh), ms = median(ds);
    pass = pass && mh > ms;
    detail << (q > 7 ? "; " : "") << "q=" << q << " median Huber " << fmt(mh, 3) << " vs squared " << fmt(ms, 3)
           << " (Huber ranked strictly first in " << huber_wins << "/20)";
  }
  detail << "; " << fmt(seconds_since(t0), 1) << " s";
  return {pass, detail.str()};
}

Outcome cli_determinism() {
  TempDir dir;
  std::mt19937_64 rng(1010);
  const Matrix x = gaussian(20, 3, rng);
  const Matrix y3 = x * low_rank(3, 3, 1, rng) + gaussian(20, 3, rng);
  const Vector y = x * sparse_vector(3, 2, rng) + gaussian_vector(20, rng);
  const Matrix z = sphere_sample(15, 3, rng);
  write_text_file(dir.file("x.csv"), csv_text(x));
  write_text_file(dir.file("y.csv"), csv_text(y));
  write_text_file(dir.file("y3.csv"), csv_text(y3));
  write_text_file(dir.file("z.csv"), csv_text(z));
  Matrix mu(3, 1);
  mu.col(0) = random_unit(3, rng);
  write_text_file(dir.file("mu.csv"), format_parameter(mu));
  write_text_file(dir.file("u.csv"), format_parameter(random_stiefel(3, 1, rng)));
  write_text_file(dir.file("loc.csv"), format_parameter(gaussian(3, 1, rng, 0.2)));
  write_text_file(dir.file("b.csv"), format_parameter(sparse_vector(3, 2, rng)));
  write_text_file(dir.file("b2.csv"), format_parameter(sparse_vector(3, 2, rng)));
  write_text_file(dir.file("pos.csv"), format_parameter(Vector(gaussian_vector(3, rng).cwiseAbs())));
  write_text_file(dir.file("B.csv"), format_parameter(low_rank(3, 3, 1, rng)));
  write_text_file(dir.file("B2.csv"), format_parameter(low_rank(3, 3, 1, rng)));
  write_text_file(dir.file("A.csv"), format_parameter(sparse_vector(3, 2, rng)));
  write_text_file(dir.file("U.csv"), format_parameter(random_stiefel(3, 1, rng)));

  const std::string X = dir.file("x.csv"), Y = dir.file("y.csv"), Y3 = dir.file("y3.csv"), Z = dir.file("z.csv");
  using Args = std::vector<std::string>;
  const std::vector<Args> commands = {
      {"depth", "--family", "location", "--data", X, "--param", dir.file("loc.csv")},
      {"depth", "--family", "regression", "--data", X, "--response", Y, "--param", dir.file("b.csv")},
      {"depth", "--family", "nonneg", "--data", X, "--response", Y, "--param", dir.file("pos.csv")},
      {"depth", "--family", "watson", "--data", Z, "--param", dir.file("mu.csv")},
      {"depth", "--family", "vmf", "--data", Z, "--param", dir.file("mu.csv")},
      {"depth", "--family", "vmf2", "--data", Z, "--param", dir.file("mu.csv")},
      {"depth", "--family", "watson2", "--data", Z, "--param", dir.file("mu.csv")},
      {"depth", "--family", "pc", "--data", Z, "--param", dir.file("u.csv"), "--intercept", dir.file("loc.csv")},
      {"depth", "--family", "oc", "--data", Z, "--param", dir.file("u.csv")},
      {"depth", "--family", "theta", "--data", X, "--response", Y, "--param", dir.file("b.csv"), "--lambda", "1",
       "--rule", "scad"},
      {"depth", "--family", "theta_sharp", "--data", X, "--response", Y, "--param", dir.file("b.csv"), "--q", "2"},
      {"depth", "--family", "rrr", "--data", X, "--response", Y3, "--param", dir.file("B.csv"), "--rank", "1"},
      {"depth", "--family", "sparse_rrr", "--data", X, "--response", Y3, "--param", dir.file("A.csv"), "--param",
       dir.file("U.csv"), "--q", "2"},
      {"rank", "--family", "theta_sharp", "--data", X, "--response", Y, "--param", dir.file("b.csv"), "--param",
       dir.file("b2.csv"), "--q", "2"},
      {"rank", "--family", "rrr", "--data", X, "--response", Y3, "--param", dir.file("B.csv"), "--param",
       dir.file("B2.csv"), "--rank", "1"},
      {"fit", "--family", "regression", "--data", X, "--response", Y},
      {"fit", "--family", "rrr", "--data", X, "--response", Y3, "--rank", "1"},
      {"fit", "--family", "theta", "--data", X, "--response", Y, "--lambda", "2", "--rule", "mcp", "--loss", "huber"},
      {"fit", "--family", "theta_sharp", "--data", X, "--response", Y, "--q", "2"},
      {"deepest", "--family", "rrr", "--data", X, "--response", Y3, "--rank", "1", "--budget", "8", "--seed", "3"},
      {"deepest", "--family", "theta_sharp", "--data", X, "--response", Y, "--q", "2", "--budget", "8"},
      {"check", "--family", "rrr", "--data", X, "--response", Y3, "--param", dir.file("B.csv"), "--rank", "1"},
      {"check", "--family", "theta", "--data", X, "--response", Y, "--param", dir.file("b.csv"), "--lambda", "1"},
  };
  int identical = 0;
  std::string failures;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    std::string out[2];
    bool ran = true;
    for (int rep = 0; rep < 2; ++rep) {
      Args a = commands[k];
      const std::string path = dir.file("out" + std::to_string(k) + "_" + std::to_string(rep) + ".csv");
      a.push_back("--out");
      a.push_back(path);
      std::string err;
      if (cli(a, &err) != 0) {
        ran = false;
        failures += " [" + a[0] + " " + a[2] + ": " + err.substr(0, err.find('\n')) + "]";
        break;
      }
      out[rep] = read_text_file(path);
    }
    if (ran && out[0] == out[1]) ++identical;
    else if (ran) failures += " [" + commands[k][0] + " " + commands[k][2] + " differs]";
  }
  Outcome o;
  o.pass = identical == static_cast<int>(commands.size());
  o.detail = std::to_string(identical) + "/" + std::to_string(commands.size()) +
             " commands byte-identical on rerun" + failures;
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"oracle equivalence in reduced dimension <= 2", oracle_equivalence},
      {"slack-grid oracle for theta_sharp", slack_grid_oracle},
      {"reduction identities", reduction_identities},
      {"fixed-point residuals", fixed_point_residuals},
      {"invariance suite", invariance_suite},
      {"order-2 consistency", order_two_consistency},
      {"smoothed gradient checks", gradient_checks},
      {"low-rank VAR with a leverage outlier", var_outlier_analog},
      {"sparse regression ranking under heavy tails", sparse_ranking_analog},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (k + 1) << " " << criteria[k].name << ": " << o.detail
              << std::endl;
  }
  return failed ? 1 : 0;
}
