#pragma once

// Random instance generators and brute-force oracles shared by the tests.
// The oracles deliberately avoid the library's solver code paths.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "depthforge/manifold.hpp"
#include "depthforge/types.hpp"

namespace testing_support {

using depthforge::Index;
using depthforge::Matrix;
using depthforge::Vector;

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

inline Vector gaussian_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
  return gaussian(n, 1, rng, scale).col(0);
}

inline Vector random_unit(Index m, std::mt19937_64& rng) {
  Vector v = gaussian_vector(m, rng);
  return v / v.norm();
}

// Rows on the unit sphere.
inline Matrix sphere_sample(Index n, Index m, std::mt19937_64& rng) {
  Matrix z = gaussian(n, m, rng);
  for (Index i = 0; i < n; ++i) z.row(i).normalize();
  return z;
}

inline Matrix random_stiefel(Index m, Index r, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(m, r, rng));
  return qr.householderQ() * Matrix::Identity(m, r);
}

inline Matrix random_rotation(Index m, std::mt19937_64& rng) {
  return random_stiefel(m, m, rng);
}

inline Vector angle_direction(double theta) {
  Vector v(2);
  v << std::cos(theta), std::sin(theta);
  return v;
}

inline long long count_closed(const Matrix& points, const Vector& v, double shift = 0.0) {
  long long c = 0;
  for (Index i = 0; i < points.rows(); ++i) c += points.row(i).dot(v) + shift >= -1e-12;
  return c;
}

// Exact planar depth: the count #{<v, p_i> >= 0} only drops on open arcs
// between consecutive critical angles, so the midpoints cover every value
// that can be a minimum.
inline long long oracle_planar_depth(const Matrix& points) {
  const double pi = std::numbers::pi;
  std::vector<double> crit;
  for (Index i = 0; i < points.rows(); ++i) {
    if (points.row(i).norm() <= 1e-14) continue;
    const double a = std::atan2(points(i, 1), points(i, 0));
    for (double t : {a + pi / 2, a - pi / 2}) crit.push_back(std::remainder(t, 2 * pi));
  }
  if (crit.empty()) return points.rows();
  std::sort(crit.begin(), crit.end());
  long long best = points.rows();
  for (std::size_t k = 0; k < crit.size(); ++k) {
    const double a = crit[k];
    const double b = k + 1 < crit.size() ? crit[k + 1] : crit[0] + 2 * pi;
    best = std::min(best, count_closed(points, angle_direction(0.5 * (a + b))));
  }
  return best;
}

// Grid over `angles` equally spaced directions; an upper bound on the depth.
inline long long grid_planar_depth(const Matrix& points, int angles = 3600) {
  long long best = points.rows();
  for (int k = 0; k < angles; ++k) {
    const double t = 2 * std::numbers::pi * k / angles;
    best = std::min(best, count_closed(points, angle_direction(t)));
  }
  return best;
}

// Exhaustive 1-D depth: min over v = +1, -1.
inline long long oracle_line_depth(const Vector& t) {
  long long pos = 0, neg = 0;
  for (Index i = 0; i < t.size(); ++i) {
    pos += t(i) >= -1e-12;
    neg += -t(i) >= -1e-12;
  }
  return std::min(pos, neg);
}

// Nearly uniform unit vectors in R^3.
inline std::vector<Vector> fibonacci_sphere(int count) {
  std::vector<Vector> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - 2.0 * (k + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vector v(3);
    v << r * std::cos(golden * k), r * std::sin(golden * k), z;
    out.push_back(v);
  }
  return out;
}

// Brute force for a box slack in R^3: every direction of the Fibonacci set
// against a `grid`-point lattice on [-bound, bound] per free coordinate.
inline long long grid_box_slack_depth(const Matrix& influences, const std::vector<Index>& free,
                                      double bound, int directions = 3600, int grid = 41) {
  const Index n = influences.rows();
  std::vector<double> levels(grid);
  for (int g = 0; g < grid; ++g) levels[g] = -bound + 2.0 * bound * g / (grid - 1);
  long long best = n;
  for (const Vector& v : fibonacci_sphere(directions)) {
    const Vector a = influences * v;
    // Enumerate the slack lattice as a mixed-radix counter.
    std::vector<int> idx(free.size(), 0);
    while (true) {
      double shift = 0.0;
      for (std::size_t j = 0; j < free.size(); ++j) shift += v(free[j]) * levels[idx[j]];
      shift /= static_cast<double>(n);
      long long c = 0;
      for (Index i = 0; i < n; ++i) c += a(i) + shift >= -1e-12;
      best = std::min(best, c);
      std::size_t j = 0;
      while (j < idx.size() && ++idx[j] == grid) idx[j++] = 0;
      if (j == idx.size()) break;
    }
  }
  return best;
}

// Exact box-slack depth in R^3. For fixed v the best slack gives the shift
// -(bound / n) sum_{j free} |v_j|, so inside each sign orthant of the free
// coordinates every margin is linear. The count is constant on the cells of
// the arrangement of those planes and the free coordinate planes; every cell
// touches an intersection line of two planes, so probing the four quadrants
// around each line at a few offsets visits them all.
inline long long vertex_box_slack_depth(const Matrix& influences, const std::vector<Index>& free,
                                        double bound) {
  const Index n = influences.rows();
  const double scale = bound / static_cast<double>(n);
  auto count = [&](const Vector& v) {
    double shift = 0.0;
    for (Index j : free) shift -= scale * std::abs(v(j));
    return count_closed(influences, v, shift);
  };
  std::vector<Eigen::Vector3d> planes;
  for (Index j : free) planes.push_back(Eigen::Vector3d::Unit(j));
  const std::size_t patterns = std::size_t{1} << free.size();
  for (Index i = 0; i < n; ++i) {
    for (std::size_t mask = 0; mask < patterns; ++mask) {
      Eigen::Vector3d h = influences.row(i).transpose();
      for (std::size_t j = 0; j < free.size(); ++j) h(free[j]) -= ((mask >> j) & 1U ? -1.0 : 1.0) * scale;
      if (h.norm() > 1e-14) planes.push_back(h);
    }
  }
  long long best = n;
  for (const Eigen::Vector3d& h : planes) best = std::min(best, count(h.normalized()));
  for (std::size_t a = 0; a < planes.size(); ++a) {
    for (std::size_t b = a + 1; b < planes.size(); ++b) {
      const Eigen::Vector3d& pa = planes[a];
      const Eigen::Vector3d& pb = planes[b];
      const Eigen::Vector3d u = pa.cross(pb);
      if (u.norm() <= 1e-12 * pa.norm() * pb.norm()) continue;
      // In-plane offsets with <pa, d> = s1, <pb, d> = s2.
      Eigen::Matrix2d g;
      g << pa.dot(pa), pa.dot(pb), pa.dot(pb), pb.dot(pb);
      for (double su : {1.0, -1.0}) {
        for (double s1 : {1.0, -1.0}) {
          for (double s2 : {1.0, -1.0}) {
            const Eigen::Vector2d c = g.inverse() * Eigen::Vector2d(s1, s2);
            const Eigen::Vector3d d = c(0) * pa + c(1) * pb;
            for (double eps : {1e-3, 1e-5, 1e-7}) {
              Vector v = (su * u.normalized() + eps * d / d.norm()).normalized();
              best = std::min(best, count(v));
            }
          }
        }
      }
    }
  }
  return best;
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testing_support
