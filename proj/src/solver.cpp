#include "depthforge/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace depthforge {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMemberTol = 1e-8;
// Direction coordinates at or below this magnitude count as zero.
constexpr double kCoordTol = 1e-12;
// Restarts are refined in fixed-size batches so that early termination does
// not depend on the thread count.
constexpr int kBatch = 8;
// Vertex probing covers reduced dimensions 3..6 with at most this many probes.
constexpr std::size_t kVertexProbeBudget = 65536;
constexpr Index kVertexProbeMaxDim = 6;
constexpr double kInf = std::numeric_limits<double>::infinity();

double indicator(double t, Indicator ind, double tol) {
  if (ind == Indicator::closed) return t >= -tol ? 1.0 : 0.0;
  if (std::abs(t) <= tol) return 0.5;
  return t > 0 ? 1.0 : 0.0;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return make_stream(seed, stream);
}

Vector random_unit(Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector w(k);
  do {
    for (Index j = 0; j < k; ++j) w(j) = normal(rng);
  } while (w.norm() < 1e-12);
  return w.normalized();
}

bool lex_less(const Vector& a, const Vector& b) {
  for (Index j = 0; j < std::min(a.size(), b.size()); ++j) {
    if (a(j) < b(j)) return true;
    if (a(j) > b(j)) return false;
  }
  return a.size() < b.size();
}

// ---------------------------------------------------------------------------
// Slack channel arithmetic on ambient directions
// ---------------------------------------------------------------------------

double channel_sign(const SlackChannel& ch) {
  return ch.kind == SlackKind::nonnegative ? -1.0 : 1.0;
}

Vector channel_embed(const SlackChannel& ch, const SlackValue& s) {
  if (ch.kind == SlackKind::spectral) return vec(ch.left * s.l * ch.right.transpose());
  return s.s;
}

Matrix spectral_block(const SlackChannel& ch, const Vector& v) {
  const Matrix big = unvec(v, ch.left.rows(), ch.right.rows());
  return ch.left.transpose() * big * ch.right;
}

SlackValue channel_zero(const SlackChannel& ch, Index d) {
  SlackValue s;
  if (ch.kind == SlackKind::spectral) s.l = Matrix::Zero(ch.left.cols(), ch.right.cols());
  else s.s = Vector::Zero(d);
  return s;
}

// Infimum over feasible slack of the shift sign <v, embed(s)> / n.
double channel_min_shift(const SlackChannel& ch, const std::vector<Index>& free, const Vector& v,
                         Index n) {
  switch (ch.kind) {
    case SlackKind::box: {
      double acc = 0.0;
      for (Index j : free) acc += std::abs(v(j));
      return -ch.bound * acc / static_cast<double>(n);
    }
    case SlackKind::nonnegative:
      for (Index j : free) {
        if (v(j) > kCoordTol) return -kInf;
      }
      return 0.0;
    case SlackKind::spectral: {
      const Matrix m = spectral_block(ch, v);
      if (m.size() == 0) return 0.0;
      Eigen::JacobiSVD<Matrix> svd(m);
      return -ch.bound * svd.singularValues().sum() / static_cast<double>(n);
    }
  }
  return 0.0;
}

// A feasible slack attaining the minimal shift. Unbounded nonnegative slack
// gets a finite value pushing every margin (at most max_margin) below -1.
SlackValue channel_argmin(const SlackChannel& ch, const std::vector<Index>& free, const Vector& v,
                          Index n, double max_margin) {
  SlackValue s = channel_zero(ch, v.size());
  switch (ch.kind) {
    case SlackKind::box:
      for (Index j : free) {
        if (v(j) > 0) s.s(j) = -ch.bound;
        else if (v(j) < 0) s.s(j) = ch.bound;
      }
      break;
    case SlackKind::nonnegative: {
      Index best = -1;
      for (Index j : free) {
        if (v(j) > kCoordTol && (best < 0 || v(j) > v(best))) best = j;
      }
      if (best >= 0) {
        s.s(best) = static_cast<double>(n) * (std::max(0.0, max_margin) + 1.0) / v(best);
      }
      break;
    }
    case SlackKind::spectral: {
      const Matrix m = spectral_block(ch, v);
      if (m.size() == 0) break;
      Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
      s.l = -ch.bound * svd.matrixU() * svd.matrixV().transpose();
      break;
    }
  }
  return s;
}

void channel_check_feasible(const SlackChannel& ch, const SlackValue& s, Index d) {
  const double tol = 1e-12;
  switch (ch.kind) {
    case SlackKind::box:
    case SlackKind::nonnegative:
      require(s.s.size() == d, "slack vector has the wrong length");
      require(s.s.allFinite(), "slack vector has non-finite entries");
      for (Index j = 0; j < d; ++j) {
        if (ch.equality_mask[static_cast<std::size_t>(j)]) {
          require(std::abs(s.s(j)) <= tol, "slack is nonzero on an equality coordinate");
        } else if (ch.kind == SlackKind::box) {
          require(std::abs(s.s(j)) <= ch.bound * (1.0 + 1e-12) + tol, "slack leaves the box");
        } else {
          require(s.s(j) >= -tol, "nonnegative slack has a negative entry");
        }
      }
      break;
    case SlackKind::spectral: {
      require(s.l.rows() == ch.left.cols() && s.l.cols() == ch.right.cols(),
              "spectral slack has the wrong shape");
      require(s.l.allFinite(), "spectral slack has non-finite entries");
      if (s.l.size() == 0) break;
      Eigen::JacobiSVD<Matrix> svd(s.l);
      require(svd.singularValues()(0) <= ch.bound * (1.0 + 1e-9) + tol,
              "spectral slack exceeds its operator norm bound");
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Reduced problem: coordinates w in R^k of directions v = basis w
// ---------------------------------------------------------------------------

struct Workspace {
  Index n = 0;
  Index d = 0;
  Index k = 0;
  Matrix basis;  // d x k
  Matrix e;      // n x k, influence plus offset
  Indicator ind = Indicator::closed;
  double tol = 1e-12;
  std::optional<SlackChannel> slack;
  std::vector<Index> free;
  Vector nu;  // per-sample margin scale for the surrogate
  double shift_cap = 0.0;

  double min_shift(const Vector& w) const {
    if (!slack) return 0.0;
    return channel_min_shift(*slack, free, basis * w, n);
  }

  double score(const Vector& w) const {
    const double c = min_shift(w);
    if (c == -kInf) return 0.0;
    const Vector m = e * w;
    double total = 0.0;
    for (Index i = 0; i < n; ++i) total += indicator(m(i) + c, ind, tol);
    return total;
  }

  double lower_bound() const {
    if (slack) return 0.0;
    double lb = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (e.row(i).norm() <= tol) lb += indicator(0.0, ind, tol);
    }
    return lb;
  }

  // q with c(w, s) = <q, w> for a fixed slack.
  Vector shift_gradient(const SlackValue& s) const {
    if (!slack) return Vector::Zero(k);
    return channel_sign(*slack) * (basis.transpose() * channel_embed(*slack, s)) /
           static_cast<double>(n);
  }
};

void canonical_frame(Workspace& w) {
  if (w.k < 2 || w.n == 0) return;
  Matrix a = w.e;
  for (Index i = 0; i < a.rows(); ++i) {
    const double nr = a.row(i).norm();
    if (nr > 0) a.row(i) /= nr;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.transpose() * a);
  if (es.info() != Eigen::Success) throw NumericError("eigen decomposition failed");
  Matrix frame = es.eigenvectors().rowwise().reverse();
  for (Index j = 0; j < frame.cols(); ++j) {
    const Vector proj = a * frame.col(j);
    Index idx = 0;
    for (Index i = 1; i < proj.size(); ++i) {
      if (std::abs(proj(i)) > std::abs(proj(idx))) idx = i;
    }
    double pivot = proj.size() > 0 ? proj(idx) : 0.0;
    if (std::abs(pivot) <= 1e-12) {
      for (Index i = 0; i < frame.rows(); ++i) {
        if (std::abs(frame(i, j)) > 1e-12) {
          pivot = frame(i, j);
          break;
        }
      }
    }
    if (pivot < 0) frame.col(j) *= -1.0;
  }
  w.basis = w.basis * frame;
  w.e = w.e * frame;
}

Workspace make_workspace(const DepthProblem& p, bool canonical, double tol) {
  Workspace w;
  w.n = p.samples();
  w.d = p.influences.dim();
  w.k = p.directions.dim();
  w.basis = p.directions.basis();
  w.e = p.influences.rows * w.basis;
  if (p.influences.offset) {
    const Vector off = w.basis.transpose() * *p.influences.offset;
    w.e.rowwise() += off.transpose();
  }
  w.ind = p.indicator;
  w.tol = tol;
  w.slack = p.slack;
  if (canonical) canonical_frame(w);
  if (w.slack) {
    w.free = w.slack->free_coordinates();
    const double n = static_cast<double>(w.n);
    switch (w.slack->kind) {
      case SlackKind::box:
        w.shift_cap = w.slack->bound * std::sqrt(static_cast<double>(w.free.size())) / n;
        break;
      case SlackKind::spectral:
        w.shift_cap = w.slack->bound *
                      std::sqrt(static_cast<double>(
                          std::min(w.slack->left.cols(), w.slack->right.cols()))) /
                      n;
        break;
      case SlackKind::nonnegative:
        break;
    }
  }
  w.nu = w.e.rowwise().norm().array() + w.shift_cap;
  return w;
}

// ---------------------------------------------------------------------------
// Smoothed criterion
// ---------------------------------------------------------------------------

double phi(Surrogate kind, double u) {
  if (kind == Surrogate::sigmoid) {
    if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
    const double ex = std::exp(u);
    return ex / (1.0 + ex);
  }
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  if (u <= 0.0) return 0.5 * (u + 1.0) * (u + 1.0);
  return 1.0 - 0.5 * (1.0 - u) * (1.0 - u);
}

double dphi(Surrogate kind, double u) {
  if (kind == Surrogate::sigmoid) {
    const double p = phi(kind, u);
    return p * (1.0 - p);
  }
  if (u <= -1.0 || u >= 1.0) return 0.0;
  return u <= 0.0 ? u + 1.0 : 1.0 - u;
}

// F(w) = sum_i phi((e_i w + q w) / (nu_i h)). Optionally its Euclidean
// gradient in w and the total weight sum_i phi'_i / (nu_i h).
double smooth_value(const Workspace& ws, Surrogate kind, const Vector& w, const Vector& q,
                    double h, Vector* grad = nullptr, double* weight = nullptr) {
  const Vector m = ws.e * w;
  const double c = q.dot(w);
  double f = 0.0;
  double total = 0.0;
  Vector coef;
  if (grad) coef = Vector::Zero(ws.n);
  for (Index i = 0; i < ws.n; ++i) {
    if (ws.nu(i) <= 0.0) continue;
    const double scale = ws.nu(i) * h;
    const double u = (m(i) + c) / scale;
    f += phi(kind, u);
    if (grad || weight) {
      const double g = dphi(kind, u) / scale;
      total += g;
      if (grad) coef(i) = g;
    }
  }
  if (grad) *grad = ws.e.transpose() * coef + total * q;
  if (weight) *weight = total;
  return f;
}

// dc/ds in slack form.
SlackValue shift_slack_derivative(const Workspace& ws, const Vector& v) {
  const SlackChannel& ch = *ws.slack;
  SlackValue out = channel_zero(ch, ws.d);
  const double n = static_cast<double>(ws.n);
  if (ch.kind == SlackKind::spectral) {
    out.l = spectral_block(ch, v) / n;
  } else {
    const double sign = channel_sign(ch);
    for (Index j : ws.free) out.s(j) = sign * v(j) / n;
  }
  return out;
}

SlackValue slack_axpy(const SlackValue& s, double a, const SlackValue& g) {
  SlackValue out = s;
  if (out.l.size() > 0) out.l += a * g.l;
  if (out.s.size() > 0) out.s += a * g.s;
  return out;
}

// phi is increasing, so for a fixed direction the smoothed value is minimized
// by the smallest achievable shift at every bandwidth: the smooth slack step
// coincides with the 0-1 one.
SlackValue smooth_slack(const Workspace& ws, const Vector& w) {
  return channel_argmin(*ws.slack, ws.free, ws.basis * w, ws.n, (ws.e * w).maxCoeff());
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

struct Candidate {
  double value = kInf;
  Vector w;
};

using ScoreFn = std::function<double(const Vector&)>;

Vector angle_vector(double t) {
  Vector w(2);
  w << std::cos(t), std::sin(t);
  return w;
}

void add_zero_angles(std::vector<double>& out, double x, double y) {
  if (x == 0.0 && y == 0.0) return;
  const double a = std::atan2(y, x);
  out.push_back(a + 0.5 * kPi);
  out.push_back(a - 0.5 * kPi);
}

double wrap_angle(double t) {
  t = std::fmod(t, 2.0 * kPi);
  if (t < 0) t += 2.0 * kPi;
  return t;
}

// Angles at which some margin can change sign in a planar first-order problem.
std::vector<double> planar_events(const Workspace& ws) {
  std::vector<double> ev;
  for (Index i = 0; i < ws.n; ++i) add_zero_angles(ev, ws.e(i, 0), ws.e(i, 1));
  if (ws.slack && ws.slack->kind == SlackKind::box && ws.slack->bound > 0) {
    std::vector<double> bounds;
    for (Index j : ws.free) add_zero_angles(bounds, ws.basis(j, 0), ws.basis(j, 1));
    for (double& b : bounds) b = wrap_angle(b);
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
    ev.insert(ev.end(), bounds.begin(), bounds.end());
    const double scale = ws.slack->bound / static_cast<double>(ws.n);
    for (std::size_t a = 0; a < bounds.size(); ++a) {
      const double lo = bounds[a];
      const double hi = a + 1 < bounds.size() ? bounds[a + 1] : bounds[0] + 2.0 * kPi;
      const Vector mid = angle_vector(0.5 * (lo + hi));
      // Inside the sector c(w) = -<q, w>.
      Vector q = Vector::Zero(2);
      for (Index j : ws.free) {
        const Vector row = ws.basis.row(j).transpose();
        const double t = row.dot(mid);
        if (t > 0) q += row;
        else if (t < 0) q -= row;
      }
      q *= scale;
      for (Index i = 0; i < ws.n; ++i) add_zero_angles(ev, ws.e(i, 0) - q(0), ws.e(i, 1) - q(1));
    }
  }
  return ev;
}

// Quadratic form zeros: w^T Q w = 0 with w = (cos t, sin t).
void add_quadratic_angles(std::vector<double>& out, const Matrix& q) {
  const double a = 0.5 * (q(0, 0) + q(1, 1));
  const double b = 0.5 * (q(0, 0) - q(1, 1));
  const double c = 0.5 * (q(0, 1) + q(1, 0));
  const double r = std::hypot(b, c);
  if (r <= 0.0 || std::abs(a) > r) return;
  const double base = std::atan2(c, b);
  const double delta = std::acos(std::clamp(-a / r, -1.0, 1.0));
  for (double t : {0.5 * (base + delta), 0.5 * (base - delta)}) {
    out.push_back(t);
    out.push_back(t + kPi);
  }
}

Candidate sweep_angles(std::vector<double> events, const ScoreFn& score, std::size_t& evals) {
  for (double& t : events) t = wrap_angle(t);
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());
  if (events.empty()) events.push_back(0.0);
  Candidate best;
  auto consider = [&](double t) {
    Vector w = angle_vector(t);
    const double s = score(w);
    ++evals;
    if (s < best.value) best = {s, std::move(w)};
  };
  for (std::size_t a = 0; a < events.size(); ++a) {
    consider(events[a]);
    const double next = a + 1 < events.size() ? events[a + 1] : events[0] + 2.0 * kPi;
    consider(0.5 * (events[a] + next));
  }
  return best;
}

Candidate sweep_line(const ScoreFn& score, std::size_t& evals) {
  Candidate best;
  for (double sgn : {1.0, -1.0}) {
    Vector w = Vector::Constant(1, sgn);
    const double s = score(w);
    ++evals;
    if (s < best.value) best = {s, std::move(w)};
  }
  return best;
}

// Every cell of a central arrangement of margin planes in R^k touches a
// vertex ray, the common null direction of k-1 independent planes. Probing
// the 2^(k-1) cells around each vertex ray (both orientations) visits every
// cell of a simple arrangement when all tuples are enumerated; past the
// budget the tuples are sampled.
std::vector<Vector> vertex_probes(const Workspace& ws, const SolverConfig& cfg) {
  const Index k = ws.k;
  std::vector<Vector> planes;
  auto add_plane = [&](const Vector& h) {
    if (h.norm() > ws.tol) planes.push_back(h);
  };
  for (Index i = 0; i < ws.n; ++i) add_plane(ws.e.row(i).transpose());
  if (ws.slack && ws.slack->kind == SlackKind::box && ws.slack->bound > 0 && ws.free.size() <= 6) {
    std::vector<Vector> rows;
    for (Index j : ws.free) {
      const Vector b = ws.basis.row(j).transpose();
      if (b.norm() > kCoordTol) rows.push_back(b);
    }
    for (const Vector& b : rows) add_plane(b);
    const double scale = ws.slack->bound / static_cast<double>(ws.n);
    // Within the sector with signs sigma, c(w) = -<q_sigma, w>.
    for (std::size_t mask = 0; mask < (std::size_t{1} << rows.size()); ++mask) {
      Vector q = Vector::Zero(k);
      for (std::size_t j = 0; j < rows.size(); ++j) q += ((mask >> j) & 1U ? -1.0 : 1.0) * rows[j];
      q *= scale;
      for (Index i = 0; i < ws.n; ++i) add_plane(ws.e.row(i).transpose() - q);
    }
  }
  const std::size_t np = planes.size();
  const std::size_t t = static_cast<std::size_t>(k - 1);
  if (np < t) return {};
  const std::size_t cells = std::size_t{1} << t;
  const std::size_t budget = std::max<std::size_t>(64, kVertexProbeBudget / (2 * cells));

  std::vector<std::vector<std::size_t>> tuples;
  // Count C(np, t) with early exit once over budget.
  double combos = 1.0;
  for (std::size_t j = 0; j < t; ++j) combos = combos * static_cast<double>(np - j) / static_cast<double>(j + 1);
  if (combos <= static_cast<double>(budget)) {
    std::vector<std::size_t> idx(t);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
      tuples.push_back(idx);
      std::size_t j = t;
      while (j > 0 && idx[j - 1] == np - t + (j - 1)) --j;
      if (j == 0) break;
      ++idx[j - 1];
      for (std::size_t l = j; l < t; ++l) idx[l] = idx[l - 1] + 1;
    }
  } else {
    auto rng = stream_rng(cfg.seed, 0xbeefULL << 32);
    std::uniform_int_distribution<std::size_t> pick(0, np - 1);
    while (tuples.size() < budget) {
      std::vector<std::size_t> idx;
      while (idx.size() < t) {
        const std::size_t a = pick(rng);
        if (std::find(idx.begin(), idx.end(), a) == idx.end()) idx.push_back(a);
      }
      tuples.push_back(std::move(idx));
    }
  }

  std::vector<Vector> out;
  Matrix a(static_cast<Index>(t), k);
  for (const auto& idx : tuples) {
    for (std::size_t j = 0; j < t; ++j) a.row(static_cast<Index>(j)) = planes[idx[j]].transpose();
    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(1e-10);
    if (lu.rank() != static_cast<Index>(t)) continue;
    const Matrix ker = lu.kernel();
    if (ker.cols() != 1) continue;
    const Vector u = ker.col(0).normalized();
    // delta = A^T (A A^T)^{-1} sigma moves off every plane of the tuple with the chosen signs.
    const Eigen::LDLT<Matrix> gram(a * a.transpose());
    for (double su : {1.0, -1.0}) {
      const Vector apex = su * u;
      for (std::size_t sm = 0; sm < cells; ++sm) {
        Vector sigma(static_cast<Index>(t));
        for (std::size_t j = 0; j < t; ++j) sigma(static_cast<Index>(j)) = (sm >> j) & 1U ? -1.0 : 1.0;
        const Vector delta = a.transpose() * gram.solve(sigma);
        const double dn = delta.norm();
        if (!(dn > 0) || !std::isfinite(dn)) continue;
        double eps = 0.1 / dn;
        for (const Vector& h : planes) {
          const double at = std::abs(h.dot(apex));
          const double slope = std::abs(h.dot(delta));
          if (at > 1e-12 * h.norm() && slope > 0) eps = std::min(eps, 0.25 * at / slope);
        }
        out.push_back((apex + eps * delta).normalized());
      }
    }
  }
  return out;
}

std::vector<Vector> make_seeds(const Workspace& ws, const SolverConfig& cfg,
                               const std::vector<Vector>& hints) {
  const Index k = ws.k;
  std::vector<Vector> seeds;
  auto add = [&](const Vector& w) {
    const double nr = w.norm();
    if (nr > 1e-12 && std::isfinite(nr)) seeds.push_back(w / nr);
  };
  for (const Vector& h : hints) add(h);
  if (ws.n >= 1) {
    const Vector rhs = -Vector::Ones(ws.n);
    add(ws.e.completeOrthogonalDecomposition().solve(rhs));
  }
  std::vector<Vector> unit;
  for (Index i = 0; i < ws.n; ++i) {
    const double nr = ws.e.row(i).norm();
    if (nr <= ws.tol) continue;
    unit.push_back(ws.e.row(i).transpose() / nr);
  }
  for (const Vector& u : unit) {
    add(-u);
    add(u);
  }
  if (ws.slack && ws.slack->kind != SlackKind::spectral) {
    for (Index j : ws.free) {
      add(ws.basis.row(j).transpose());
      add(-ws.basis.row(j).transpose());
    }
  }
  const std::size_t m = unit.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t cap = static_cast<std::size_t>(cfg.pair_seed_cap);
  if (m >= 2) {
    if (m * (m - 1) / 2 <= cap) {
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) pairs.emplace_back(a, b);
    } else {
      auto rng = stream_rng(cfg.seed, 0xfeedULL << 32);
      std::uniform_int_distribution<std::size_t> pick(0, m - 1);
      while (pairs.size() < cap) {
        const std::size_t a = pick(rng);
        const std::size_t b = pick(rng);
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  for (const auto& [a, b] : pairs) {
    add(-(unit[a] + unit[b]));
    add(unit[a] - unit[b]);
    add(unit[b] - unit[a]);
  }
  if (k >= 3 && k <= kVertexProbeMaxDim) {
    for (Vector& w : vertex_probes(ws, cfg)) seeds.push_back(std::move(w));
  }
  for (int r = 0; r < cfg.restarts; ++r) {
    auto rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(r));
    seeds.push_back(random_unit(k, rng));
  }
  return seeds;
}

Candidate refine(const Workspace& ws, const SolverConfig& cfg, const std::vector<double>& bands,
                 Vector w, const ScoreFn& score, double lower_bound, std::size_t& evals) {
  SlackValue s;
  if (ws.slack) s = channel_argmin(*ws.slack, ws.free, ws.basis * w, ws.n, (ws.e * w).maxCoeff());
  Candidate best{score(w), w};
  ++evals;
  if (best.value <= lower_bound) return best;
  Vector q = Vector::Zero(ws.k);
  for (double h : bands) {
    for (int it = 0; it < cfg.max_iters; ++it) {
      if (ws.slack) {
        s = smooth_slack(ws, w);
        q = ws.shift_gradient(s);
      }
      Vector grad;
      const double f = smooth_value(ws, cfg.surrogate, w, q, h, &grad);
      Vector rg = grad - grad.dot(w) * w;
      const double gn = rg.norm();
      if (!(gn > 1e-14)) break;
      const Vector dir = rg / gn;
      double eta = cfg.initial_step;
      bool accepted = false;
      Vector w2;
      double f2 = f;
      for (int ls = 0; ls < 40; ++ls) {
        w2 = (std::cos(eta) * w - std::sin(eta) * dir).normalized();
        f2 = smooth_value(ws, cfg.surrogate, w2, q, h);
        if (f2 <= f - 1e-4 * eta * gn) {
          accepted = true;
          break;
        }
        eta *= cfg.shrink;
      }
      if (!accepted) break;
      w = std::move(w2);
      const double sc = score(w);
      ++evals;
      if (sc < best.value) {
        best = {sc, w};
        if (best.value <= lower_bound) return best;
      }
      if (f - f2 <= 1e-9 * std::max(1.0, f)) break;
    }
  }
  return best;
}

struct SearchOutcome {
  Candidate best;
  Certificate certificate = Certificate::heuristic_upper_bound;
  int restarts_used = 0;
  std::size_t evaluations = 0;
};

bool better(const Workspace& ws, const Candidate& a, const Candidate& b) {
  if (a.value != b.value) return a.value < b.value;
  return lex_less(ws.basis * a.w, ws.basis * b.w);
}

SearchOutcome heuristic_search(const Workspace& ws, const SolverConfig& cfg, const ScoreFn& score,
                               double lower_bound) {
  SearchOutcome out;
  std::vector<Vector> hints;
  for (const Vector& h : cfg.hints) {
    require(h.size() == ws.d, "solver hint has the wrong dimension");
    hints.push_back(ws.basis.transpose() * h);
  }
  const std::vector<Vector> seeds = make_seeds(ws, cfg, hints);
  std::vector<double> values(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    values[i] = score(seeds[i]);
    ++out.evaluations;
    Candidate c{values[i], seeds[i]};
    if (out.best.w.size() == 0 || better(ws, c, out.best)) out.best = c;
  }
  if (out.best.value <= lower_bound) return out;

  std::vector<std::size_t> order(seeds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  order.resize(std::min(order.size(), static_cast<std::size_t>(cfg.restarts)));

  const std::vector<double> bands = cfg.bandwidths();
  const int threads = cfg.threads > 0 ? cfg.threads : default_thread_count();
  std::vector<Candidate> results(order.size());
  std::vector<std::size_t> counts(order.size(), 0);
  for (std::size_t start = 0; start < order.size(); start += kBatch) {
    const int len = static_cast<int>(std::min<std::size_t>(kBatch, order.size() - start));
    parallel_for(len, threads, [&](int j) {
      const std::size_t idx = start + static_cast<std::size_t>(j);
      results[idx] =
          refine(ws, cfg, bands, seeds[order[idx]], score, lower_bound, counts[idx]);
    });
    out.restarts_used += len;
    bool done = false;
    for (int j = 0; j < len; ++j) {
      const Candidate& c = results[start + static_cast<std::size_t>(j)];
      if (better(ws, c, out.best)) out.best = c;
      done = done || c.value <= lower_bound;
    }
    if (done) break;
  }
  for (std::size_t c : counts) out.evaluations += c;
  return out;
}

DepthProblem normalize_problem(const DepthProblem& p) {
  DepthProblem q = p;
  if (q.influences.offset && q.influences.offset->isZero(0.0)) q.influences.offset.reset();
  if (q.slack && q.slack->inert()) q.slack.reset();
  return q;
}

void check_direction(const TangentBasis& dirs, const Vector& v) {
  require(v.size() == dirs.ambient_dim(), "direction has the wrong dimension");
  require(v.allFinite(), "direction has non-finite entries");
  require(std::abs(v.norm() - 1.0) <= kMemberTol, "direction is not a unit vector");
  const Matrix& b = dirs.basis();
  require((v - b * (b.transpose() * v)).norm() <= kMemberTol,
          "direction does not lie in the direction space");
}

DepthResult finish(const DepthProblem& p, const Workspace& ws, const Vector& w,
                   Certificate cert, std::size_t evals, int restarts, double final_band) {
  DepthResult r;
  r.samples = p.samples();
  r.direction = ws.basis * w;
  const double nr = r.direction.norm();
  if (nr > 0) r.direction /= nr;
  double shift = 0.0;
  if (p.influences.offset) shift += p.influences.offset->dot(r.direction);
  if (p.slack) {
    const std::vector<Index> free = p.slack->free_coordinates();
    const double max_margin = (p.influences.rows * r.direction).array().maxCoeff() + shift;
    r.slack = channel_argmin(*p.slack, free, r.direction, p.samples(), max_margin);
    shift += channel_sign(*p.slack) * r.direction.dot(channel_embed(*p.slack, *r.slack)) /
             static_cast<double>(p.samples());
  }
  r.shift = shift;
  r.value = evaluate_01(p, r.direction, r.slack);
  r.normalized = r.value / static_cast<double>(r.samples);
  r.certificate = cert;
  r.diagnostics.ambient_dim = ws.d;
  r.diagnostics.reduced_dim = ws.k;
  r.diagnostics.evaluations = evals;
  r.diagnostics.restarts_used = restarts;
  r.diagnostics.final_bandwidth = final_band;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public types
// ---------------------------------------------------------------------------

SlackChannel SlackChannel::box(std::vector<bool> equality_mask, double bound) {
  SlackChannel c;
  c.kind = SlackKind::box;
  c.equality_mask = std::move(equality_mask);
  c.bound = bound;
  return c;
}

SlackChannel SlackChannel::nonnegative(std::vector<bool> equality_mask) {
  SlackChannel c;
  c.kind = SlackKind::nonnegative;
  c.equality_mask = std::move(equality_mask);
  c.bound = kInf;
  return c;
}

SlackChannel SlackChannel::spectral(Matrix left, Matrix right, double bound) {
  SlackChannel c;
  c.kind = SlackKind::spectral;
  c.left = std::move(left);
  c.right = std::move(right);
  c.bound = bound;
  return c;
}

std::vector<Index> SlackChannel::free_coordinates() const {
  std::vector<Index> out;
  for (std::size_t j = 0; j < equality_mask.size(); ++j) {
    if (!equality_mask[j]) out.push_back(static_cast<Index>(j));
  }
  return out;
}

bool SlackChannel::inert() const {
  switch (kind) {
    case SlackKind::box:
      return bound == 0.0 || free_coordinates().empty();
    case SlackKind::nonnegative:
      return free_coordinates().empty();
    case SlackKind::spectral:
      return bound == 0.0 || left.cols() == 0 || right.cols() == 0;
  }
  return true;
}

void SlackChannel::validate(Index ambient_dim) const {
  switch (kind) {
    case SlackKind::box:
      require(std::isfinite(bound) && bound >= 0.0, "box slack bound must be finite and >= 0");
      [[fallthrough]];
    case SlackKind::nonnegative:
      require(static_cast<Index>(equality_mask.size()) == ambient_dim,
              "slack equality mask length must equal the influence dimension");
      break;
    case SlackKind::spectral: {
      require(std::isfinite(bound) && bound >= 0.0, "spectral slack bound must be finite and >= 0");
      require(left.rows() * right.rows() == ambient_dim,
              "spectral slack factors do not match the influence dimension");
      require(left.allFinite() && right.allFinite(), "spectral slack factors are not finite");
      for (const Matrix* f : {&left, &right}) {
        if (f->cols() == 0) continue;
        const double err =
            (f->transpose() * *f - Matrix::Identity(f->cols(), f->cols())).cwiseAbs().maxCoeff();
        require(err <= 1e-8, "spectral slack factors must have orthonormal columns");
      }
      break;
    }
  }
}

std::string SlackChannel::describe() const {
  std::ostringstream os;
  switch (kind) {
    case SlackKind::box:
      os << "box(bound=" << bound << ", free=" << free_coordinates().size() << ")";
      break;
    case SlackKind::nonnegative:
      os << "nonnegative(free=" << free_coordinates().size() << ")";
      break;
    case SlackKind::spectral:
      os << "spectral(bound=" << bound << ", " << left.cols() << "x" << right.cols() << ")";
      break;
  }
  return os.str();
}

DepthProblem::DepthProblem(InfluenceSet influences_, TangentBasis directions_,
                           std::optional<SlackChannel> slack_, Indicator indicator_)
    : influences(std::move(influences_)),
      directions(std::move(directions_)),
      slack(std::move(slack_)),
      indicator(indicator_) {}

DepthProblem DepthProblem::plain(InfluenceSet influences) {
  const Index d = influences.dim();
  return DepthProblem(std::move(influences), TangentBasis::identity(d));
}

void DepthProblem::validate() const {
  influences.validate();
  require(samples() >= 1, "depth needs at least one sample");
  require(directions.ambient_dim() == influences.dim(),
          "direction space and influences have different ambient dimensions");
  if (slack) slack->validate(influences.dim());
}

void SolverConfig::validate() const {
  require(restarts >= 1, "restarts must be >= 1");
  require(stages >= 1, "stages must be >= 1");
  require(max_iters >= 1, "max_iters must be >= 1");
  require(bandwidth_end > 0 && bandwidth_start >= bandwidth_end && std::isfinite(bandwidth_start),
          "bandwidths must satisfy start >= end > 0");
  require(initial_step > 0 && std::isfinite(initial_step), "initial step must be positive");
  require(shrink > 0 && shrink < 1, "shrink factor must lie in (0, 1)");
  require(zero_tol >= 0 && std::isfinite(zero_tol), "zero tolerance must be >= 0");
  require(pair_seed_cap >= 0, "pair seed cap must be >= 0");
  require(threads >= 0, "threads must be >= 0");
}

std::vector<double> SolverConfig::bandwidths() const {
  if (stages == 1) return {bandwidth_end};
  std::vector<double> out;
  const double ratio = bandwidth_end / bandwidth_start;
  for (int s = 0; s < stages; ++s) {
    out.push_back(bandwidth_start * std::pow(ratio, static_cast<double>(s) / (stages - 1)));
  }
  return out;
}

std::string to_string(Certificate c) {
  return c == Certificate::exact_oracle ? "exact_oracle" : "heuristic_upper_bound";
}

long long DepthResult::count() const { return std::llround(value); }

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix(splitmix(seed) ^ splitmix(stream + 0x632be59bd9b4e019ULL)));
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int workers = std::min(threads, count);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

int default_thread_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("DEPTHFORGE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) return static_cast<int>(std::min<long>(cap, hw));
  }
  return hw;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

double evaluate_01(const DepthProblem& problem, const Vector& v,
                   const std::optional<SlackValue>& s, double zero_tol) {
  problem.validate();
  check_direction(problem.directions, v);
  const Index n = problem.samples();
  double shift = 0.0;
  if (problem.influences.offset) shift += problem.influences.offset->dot(v);
  if (s) {
    require(problem.slack.has_value(), "slack given for a problem without a slack channel");
    channel_check_feasible(*problem.slack, *s, problem.influences.dim());
    shift += channel_sign(*problem.slack) * v.dot(channel_embed(*problem.slack, *s)) /
             static_cast<double>(n);
  }
  const Vector m = problem.influences.rows * v;
  double total = 0.0;
  for (Index i = 0; i < n; ++i) total += indicator(m(i) + shift, problem.indicator, zero_tol);
  return total;
}

std::pair<long long, Vector> exact_depth_2d_argmin(const Matrix& points, double zero_tol) {
  require(points.cols() == 2, "exact_depth_2d needs two columns");
  require(points.rows() >= 1, "exact_depth_2d needs at least one point");
  require(points.allFinite(), "exact_depth_2d: non-finite points");
  Workspace ws;
  ws.n = points.rows();
  ws.d = ws.k = 2;
  ws.basis = Matrix::Identity(2, 2);
  ws.e = points;
  ws.tol = zero_tol;
  std::size_t evals = 0;
  const Candidate best =
      sweep_angles(planar_events(ws), [&](const Vector& w) { return ws.score(w); }, evals);
  return {std::llround(best.value), best.w};
}

long long exact_depth_2d(const Matrix& points, double zero_tol) {
  return exact_depth_2d_argmin(points, zero_tol).first;
}

SlackStep slack_step_01(const DepthProblem& problem, const Vector& v) {
  problem.validate();
  check_direction(problem.directions, v);
  require(problem.slack.has_value(), "slack_step_01 needs a slack channel");
  const SlackChannel& ch = *problem.slack;
  double max_margin = (problem.influences.rows * v).maxCoeff();
  if (problem.influences.offset) max_margin += problem.influences.offset->dot(v);
  SlackStep out;
  out.slack = channel_argmin(ch, ch.free_coordinates(), v, problem.samples(), max_margin);
  out.shift = channel_sign(ch) * v.dot(channel_embed(ch, out.slack)) /
              static_cast<double>(problem.samples());
  return out;
}

SlackValue slack_step_smooth(const DepthProblem& problem, const Vector& v, double bandwidth,
                             const SolverConfig& config, const std::optional<SlackValue>& start) {
  problem.validate();
  config.validate();
  check_direction(problem.directions, v);
  require(problem.slack.has_value(), "slack_step_smooth needs a slack channel");
  require(bandwidth > 0 && std::isfinite(bandwidth), "bandwidth must be positive");
  const Workspace ws = make_workspace(problem, false, config.zero_tol);
  if (start) channel_check_feasible(*problem.slack, *start, ws.d);
  return smooth_slack(ws, ws.basis.transpose() * v);
}

DepthResult solve_depth(const DepthProblem& problem_in, const SolverConfig& config) {
  problem_in.validate();
  config.validate();
  DepthProblem problem = normalize_problem(problem_in);
  const Index k = problem.directions.dim();
  const Matrix& basis = problem.directions.basis();

  if (k == 0) {
    DepthResult r;
    r.samples = problem.samples();
    r.direction = Vector::Zero(problem.influences.dim());
    const double unit = indicator(0.0, problem.indicator, config.zero_tol);
    r.value = unit * static_cast<double>(r.samples);
    r.normalized = unit;
    r.certificate = Certificate::exact_oracle;
    r.diagnostics.ambient_dim = problem.influences.dim();
    return r;
  }

  if (problem.slack && problem.slack->kind == SlackKind::nonnegative) {
    // Any reachable free coordinate lets the slack send the shift to -inf.
    Index best = -1;
    double best_norm = 0.0;
    for (Index j : problem.slack->free_coordinates()) {
      const double nr = basis.row(j).norm();
      if (nr > kCoordTol && nr > best_norm) {
        best = j;
        best_norm = nr;
      }
    }
    if (best < 0) {
      problem.slack.reset();
    } else {
      const Workspace ws = make_workspace(problem, false, config.zero_tol);
      const Vector w = basis.row(best).transpose() / best_norm;
      return finish(problem, ws, w, Certificate::exact_oracle, 1, 0, 0.0);
    }
  }

  const Workspace ws = make_workspace(problem, true, config.zero_tol);
  const ScoreFn score = [&](const Vector& w) { return ws.score(w); };
  std::size_t evals = 0;
  if (k == 1) {
    const Candidate c = sweep_line(score, evals);
    return finish(problem, ws, c.w, Certificate::exact_oracle, evals, 0, 0.0);
  }
  if (k == 2 && (!problem.slack || problem.slack->kind == SlackKind::box)) {
    const Candidate c = sweep_angles(planar_events(ws), score, evals);
    return finish(problem, ws, c.w, Certificate::exact_oracle, evals, 0, 0.0);
  }
  const SearchOutcome out = heuristic_search(ws, config, score, ws.lower_bound());
  return finish(problem, ws, out.best.w, out.certificate, out.evaluations, out.restarts_used,
                config.bandwidth_end);
}

// ---------------------------------------------------------------------------
// SmoothedObjective
// ---------------------------------------------------------------------------

struct SmoothedObjective::Impl {
  Workspace ws;
  Surrogate kind;
};

SmoothedObjective::SmoothedObjective(const DepthProblem& problem, Surrogate surrogate) {
  problem.validate();
  auto impl = std::make_shared<Impl>();
  impl->ws = make_workspace(normalize_problem(problem), false, 1e-12);
  impl->kind = surrogate;
  impl_ = std::move(impl);
}

Index SmoothedObjective::reduced_dim() const { return impl_->ws.k; }

const Matrix& SmoothedObjective::basis() const { return impl_->ws.basis; }

SlackValue SmoothedObjective::zero_slack() const {
  if (!impl_->ws.slack) return {};
  return channel_zero(*impl_->ws.slack, impl_->ws.d);
}

double SmoothedObjective::value(const Vector& w, const SlackValue& s, double bandwidth) const {
  require(w.size() == impl_->ws.k, "SmoothedObjective: w has the wrong dimension");
  return smooth_value(impl_->ws, impl_->kind, w, impl_->ws.shift_gradient(s), bandwidth);
}

Vector SmoothedObjective::gradient_direction(const Vector& w, const SlackValue& s,
                                             double bandwidth) const {
  require(w.size() == impl_->ws.k, "SmoothedObjective: w has the wrong dimension");
  Vector g;
  smooth_value(impl_->ws, impl_->kind, w, impl_->ws.shift_gradient(s), bandwidth, &g);
  return g;
}

SlackValue SmoothedObjective::gradient_slack(const Vector& w, const SlackValue& s,
                                             double bandwidth) const {
  const Workspace& ws = impl_->ws;
  require(w.size() == ws.k, "SmoothedObjective: w has the wrong dimension");
  if (!ws.slack) return {};
  double weight = 0.0;
  smooth_value(ws, impl_->kind, w, ws.shift_gradient(s), bandwidth, nullptr, &weight);
  SlackValue dc = shift_slack_derivative(ws, ws.basis * w);
  return slack_axpy(channel_zero(*ws.slack, ws.d), weight, dc);
}

// ---------------------------------------------------------------------------
// Order-2 criterion
// ---------------------------------------------------------------------------

Vector SecondOrderTerms::at(const Vector& v) const {
  if (!quadratic_forms.empty()) {
    Vector h(static_cast<Index>(quadratic_forms.size()));
    for (std::size_t i = 0; i < quadratic_forms.size(); ++i) {
      h(static_cast<Index>(i)) = v.dot(quadratic_forms[i] * v);
    }
    return h;
  }
  require(static_cast<bool>(evaluate), "second-order terms have no evaluator");
  return evaluate(v);
}

namespace {

double order2_value(const Vector& g, const Vector& h, OrderTwoCriterion crit, double tol) {
  if (crit == OrderTwoCriterion::product) {
    double a = 0.0;
    double b = 0.0;
    for (Index i = 0; i < g.size(); ++i) {
      a += indicator(g(i), Indicator::half_open, tol);
      b += h(i) >= -tol ? 1.0 : 0.0;
    }
    return a * b;
  }
  double total = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    total += indicator(g(i), Indicator::half_open, tol) * (h(i) >= -tol ? 1.0 : 0.0);
  }
  return total;
}

void validate_order2(const OrderTwoProblem& p) {
  p.first_order.validate();
  require(p.first_order.samples() >= 1, "order-2 depth needs at least one sample");
  require(p.directions.ambient_dim() == p.first_order.dim(),
          "direction space and influences have different ambient dimensions");
  const auto& forms = p.second_order.quadratic_forms;
  if (!forms.empty()) {
    require(static_cast<Index>(forms.size()) == p.first_order.samples(),
            "one quadratic form per sample is required");
    for (const Matrix& f : forms) {
      require(f.rows() == p.first_order.dim() && f.cols() == p.first_order.dim(),
              "quadratic form has the wrong shape");
    }
  } else {
    require(static_cast<bool>(p.second_order.evaluate), "second-order terms have no evaluator");
  }
}

}  // namespace

double evaluate_order2(const OrderTwoProblem& problem, const Vector& v, double zero_tol) {
  validate_order2(problem);
  check_direction(problem.directions, v);
  Vector g = problem.first_order.rows * v;
  if (problem.first_order.offset) g.array() += problem.first_order.offset->dot(v);
  const Vector h = problem.second_order.at(v);
  require(h.size() == g.size(), "second-order evaluator returned the wrong length");
  return order2_value(g, h, problem.criterion, zero_tol);
}

DepthResult order2_depth(const OrderTwoProblem& problem, const SolverConfig& config) {
  validate_order2(problem);
  config.validate();
  const Index n = problem.first_order.samples();
  const double denom = problem.criterion == OrderTwoCriterion::product
                           ? static_cast<double>(n) * static_cast<double>(n)
                           : static_cast<double>(n);
  const DepthProblem first(problem.first_order, problem.directions, std::nullopt,
                           Indicator::half_open);
  const bool has_forms = !problem.second_order.quadratic_forms.empty();
  const Index k = problem.directions.dim();

  DepthResult r;
  r.samples = n;
  r.diagnostics.ambient_dim = problem.first_order.dim();
  r.diagnostics.reduced_dim = k;
  if (k == 0) {
    r.direction = Vector::Zero(problem.first_order.dim());
    const Vector g = Vector::Zero(n);
    r.value = order2_value(g, problem.second_order.at(r.direction), problem.criterion,
                           config.zero_tol);
    r.normalized = r.value / denom;
    r.certificate = Certificate::exact_oracle;
    return r;
  }

  const Workspace ws = make_workspace(normalize_problem(first), k > 2, config.zero_tol);
  std::vector<Matrix> reduced;
  if (has_forms) {
    for (const Matrix& f : problem.second_order.quadratic_forms) {
      reduced.push_back(ws.basis.transpose() * f * ws.basis);
    }
  }
  const ScoreFn score = [&](const Vector& w) {
    const Vector g = ws.e * w;
    Vector h;
    if (has_forms) {
      h.resize(n);
      for (Index i = 0; i < n; ++i) h(i) = w.dot(reduced[static_cast<std::size_t>(i)] * w);
    } else {
      h = problem.second_order.evaluate(ws.basis * w);
      if (h.size() != n) throw ValidationError("second-order evaluator returned the wrong length");
    }
    return order2_value(g, h, problem.criterion, config.zero_tol);
  };

  std::size_t evals = 0;
  Candidate best;
  r.certificate = Certificate::heuristic_upper_bound;
  if (k == 1) {
    best = sweep_line(score, evals);
    r.certificate = Certificate::exact_oracle;
  } else if (k == 2 && has_forms) {
    std::vector<double> events = planar_events(ws);
    for (const Matrix& q : reduced) add_quadratic_angles(events, q);
    best = sweep_angles(std::move(events), score, evals);
    r.certificate = Certificate::exact_oracle;
  } else {
    const SearchOutcome out = heuristic_search(ws, config, score, 0.0);
    best = out.best;
    evals = out.evaluations;
    r.diagnostics.restarts_used = out.restarts_used;
    r.diagnostics.final_bandwidth = config.bandwidth_end;
  }
  r.direction = (ws.basis * best.w).normalized();
  r.value = evaluate_order2(problem, r.direction, config.zero_tol);
  r.normalized = r.value / denom;
  if (problem.first_order.offset) r.shift = problem.first_order.offset->dot(r.direction);
  r.diagnostics.evaluations = evals;
  return r;
}

}  // namespace depthforge
