#pragma once

#include <Eigen/Dense>

#include <cstddef>

#include "geotlr/compression.hpp"
#include "geotlr/errors.hpp"
#include "geotlr/geometry.hpp"
#include "geotlr/kernels.hpp"
#include "geotlr/tilestore.hpp"

namespace geotlr {

/// Dense Matérn block between two index ranges of a location set, nugget excluded.
inline Eigen::MatrixXd covariance_block(const LocationSet& set, const MaternKernel& kernel, IndexRange rows,
                                        IndexRange cols) {
  Eigen::MatrixXd block = pairwise_distance_block(set, rows, cols);
  kernel.apply(block.data(), static_cast<std::size_t>(block.size()));
  // Vector and scalar exp may differ in the last bit; keep diagonal tiles exactly symmetric.
  if (rows.begin == cols.begin && rows.size == cols.size) {
    block.triangularView<Eigen::StrictlyUpper>() = block.transpose();
  }
  return block;
}

/// Dense Matérn cross-covariance between two location sets (rows from `a`, columns from `b`).
inline Eigen::MatrixXd cross_covariance(const LocationSet& a, const LocationSet& b, const MaternParams& p) {
  if (!(a.metric() == b.metric())) throw InputError("location sets use different metrics");
  const MaternKernel kernel(p);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = distance(a[i], b[j], a.metric());
    }
  }
  kernel.apply(out.data(), static_cast<std::size_t>(out.size()));
  return out;
}

/// Covariance matrix Sigma_ij = C(||s_i - s_j||) + nugget [i == j] on a tile grid.
///
/// Every tile is generated independently. In TLR mode each off-diagonal tile
/// is generated dense and compressed to the mode's accuracy at once, so the
/// full dense matrix never exists.
inline SymmetricTileMatrix assemble_covariance(const LocationSet& set, const MaternParams& p, const TileGrid& grid,
                                               const StorageMode& mode,
                                               CompressionMethod method = CompressionMethod::PivotedQr) {
  if (set.size() != grid.n()) throw InputError("location count does not match tile grid order");
  const MaternKernel kernel(p);
  SymmetricTileMatrix m(grid, mode);
  for (std::size_t i = 0; i < grid.tiles(); ++i) {
    DenseTile d = covariance_block(set, kernel, grid.range(i), grid.range(i));
    d.diagonal().array() += p.nugget;
    m.diagonal(i) = std::move(d);
    for (std::size_t j = 0; j < i; ++j) {
      DenseTile tile = covariance_block(set, kernel, grid.range(i), grid.range(j));
      if (mode.is_tlr()) {
        m.lower(i, j) = compress_tile(tile, mode.accuracy, method);
      } else {
        m.lower(i, j) = std::move(tile);
      }
    }
  }
  return m;
}

}  // namespace geotlr
