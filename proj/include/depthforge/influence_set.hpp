#pragma once

#include <optional>

#include "depthforge/types.hpp"

namespace depthforge {

/// n per-sample influence vectors in R^d (one per row) and an optional shared
/// d-vector added to every sample.
struct InfluenceSet {
  Matrix rows;
  std::optional<Vector> offset;

  InfluenceSet() = default;
  explicit InfluenceSet(Matrix r, std::optional<Vector> off = std::nullopt);

  Index samples() const { return rows.rows(); }
  Index dim() const { return rows.cols(); }
  void validate() const;
};

class TangentBasis;

/// Coordinates of each influence (and the offset) in an orthonormal basis:
/// rows * basis. For unit w in R^k, <basis w, T_i> = <w, basis^T T_i>.
InfluenceSet subspace_reparametrize(const InfluenceSet& influences, const TangentBasis& basis);

}  // namespace depthforge
