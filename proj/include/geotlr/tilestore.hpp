#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "geotlr/errors.hpp"
#include "geotlr/geometry.hpp"

namespace geotlr {

using DenseTile = Eigen::MatrixXd;

/// Square tiling of an n x n matrix into t x t tiles of (at most) nb rows.
/// The last tile row/column is ragged when nb does not divide n.
class TileGrid {
 public:
  TileGrid(std::size_t n, std::size_t nb) : n_(n), nb_(nb) {
    if (n == 0) throw InputError("tile grid needs n >= 1");
    if (nb == 0) throw InputError("tile size must be >= 1");
    if (nb_ > n_) nb_ = n_;
    t_ = (n_ + nb_ - 1) / nb_;
  }

  std::size_t n() const { return n_; }
  std::size_t nb() const { return nb_; }
  std::size_t tiles() const { return t_; }

  std::size_t offset(std::size_t tile) const { return tile * nb_; }
  std::size_t tile_size(std::size_t tile) const { return tile + 1 < t_ ? nb_ : n_ - (t_ - 1) * nb_; }
  IndexRange range(std::size_t tile) const { return {offset(tile), tile_size(tile)}; }

  /// Global index -> (tile, index within tile).
  std::pair<std::size_t, std::size_t> locate(std::size_t global) const { return {global / nb_, global % nb_}; }
  std::size_t global(std::size_t tile, std::size_t local) const { return tile * nb_ + local; }

  friend bool operator==(const TileGrid&, const TileGrid&) = default;

 private:
  std::size_t n_;
  std::size_t nb_;
  std::size_t t_ = 0;
};

/// Tile stored as the product u * v^T; rank 0 is the zero tile.
struct LowRankTile {
  Eigen::MatrixXd u;  // rows x k
  Eigen::MatrixXd v;  // cols x k

  LowRankTile() = default;
  LowRankTile(Eigen::MatrixXd u_, Eigen::MatrixXd v_) : u(std::move(u_)), v(std::move(v_)) {
    if (u.cols() != v.cols()) throw InputError("low-rank factors disagree on rank");
  }
  static LowRankTile zero(Eigen::Index rows, Eigen::Index cols) {
    return LowRankTile(Eigen::MatrixXd(rows, 0), Eigen::MatrixXd(cols, 0));
  }

  Eigen::Index rows() const { return u.rows(); }
  Eigen::Index cols() const { return v.rows(); }
  Eigen::Index rank() const { return u.cols(); }
  std::size_t stored_reals() const { return static_cast<std::size_t>(u.size() + v.size()); }

  Eigen::MatrixXd dense() const {
    if (rank() == 0) return Eigen::MatrixXd::Zero(rows(), cols());
    return u * v.transpose();
  }
};

using OffDiagonalTile = std::variant<DenseTile, LowRankTile>;

enum class StorageKind { Dense, TLR };

/// Dense full-tile storage, or tile low-rank at a given relative accuracy.
struct StorageMode {
  StorageKind kind = StorageKind::Dense;
  double accuracy = 0.0;

  static StorageMode dense() { return {}; }
  static StorageMode tlr(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw InputError("TLR accuracy must lie in (0, 1)");
    return {StorageKind::TLR, eps};
  }
  bool is_tlr() const { return kind == StorageKind::TLR; }

  std::string label() const;

  friend bool operator==(const StorageMode&, const StorageMode&) = default;
};

inline std::string StorageMode::label() const {
  if (!is_tlr()) return "dense";
  char buf[32];
  std::snprintf(buf, sizeof buf, "tlr:%g", accuracy);
  return buf;
}

/// Bytes needed by the tile layout versus its all-dense equivalent.
struct Footprint {
  std::size_t bytes_dense_equiv = 0;
  std::size_t bytes_actual = 0;
  double compression_ratio = 1.0;
};

/// Symmetric matrix on a tile grid; only tiles (i, j) with i >= j are stored.
/// Diagonal tiles are dense, off-diagonal tiles are dense or low rank.
class SymmetricTileMatrix {
 public:
  SymmetricTileMatrix(TileGrid grid, StorageMode mode) : grid_(grid), mode_(mode) {
    const std::size_t t = grid_.tiles();
    diag_.resize(t);
    lower_.resize(t * (t - 1) / 2);
  }

  const TileGrid& grid() const { return grid_; }
  const StorageMode& mode() const { return mode_; }
  std::size_t tiles() const { return grid_.tiles(); }

  DenseTile& diagonal(std::size_t k) { return diag_.at(k); }
  const DenseTile& diagonal(std::size_t k) const { return diag_.at(k); }

  /// Tile (i, j) for i > j.
  OffDiagonalTile& lower(std::size_t i, std::size_t j) { return lower_.at(packed(i, j)); }
  const OffDiagonalTile& lower(std::size_t i, std::size_t j) const { return lower_.at(packed(i, j)); }

  Eigen::Index tile_rank(std::size_t i, std::size_t j) const {
    const auto& tile = lower(i, j);
    if (const auto* lr = std::get_if<LowRankTile>(&tile)) return lr->rank();
    const auto& d = std::get<DenseTile>(tile);
    return std::min(d.rows(), d.cols());
  }

  std::size_t stored_reals() const {
    std::size_t count = 0;
    for (const auto& d : diag_) count += static_cast<std::size_t>(d.size());
    for (const auto& tile : lower_) {
      count += std::visit(
          [](const auto& x) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(x)>, LowRankTile>) {
              return x.stored_reals();
            } else {
              return static_cast<std::size_t>(x.size());
            }
          },
          tile);
    }
    return count;
  }

  /// Full symmetric dense matrix.
  Eigen::MatrixXd densify() const { return densify_impl(true); }
  /// Lower tiles only (upper tiles zero), as stored.
  Eigen::MatrixXd densify_lower() const { return densify_impl(false); }

 private:
  std::size_t packed(std::size_t i, std::size_t j) const {
    if (!(i > j && i < grid_.tiles())) throw InputError("off-diagonal tile index must satisfy j < i < t");
    return i * (i - 1) / 2 + j;
  }

  Eigen::MatrixXd densify_impl(bool mirror) const {
    const auto n = static_cast<Eigen::Index>(grid_.n());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < grid_.tiles(); ++i) {
      const auto ri = grid_.range(i);
      const auto oi = static_cast<Eigen::Index>(ri.begin);
      const auto si = static_cast<Eigen::Index>(ri.size);
      out.block(oi, oi, si, si) = diag_[i];
      for (std::size_t j = 0; j < i; ++j) {
        const auto rj = grid_.range(j);
        const auto oj = static_cast<Eigen::Index>(rj.begin);
        const auto sj = static_cast<Eigen::Index>(rj.size);
        const auto& tile = lower(i, j);
        Eigen::MatrixXd block = std::holds_alternative<LowRankTile>(tile) ? std::get<LowRankTile>(tile).dense()
                                                                          : std::get<DenseTile>(tile);
        out.block(oi, oj, si, sj) = block;
        if (mirror) out.block(oj, oi, sj, si) = block.transpose();
      }
    }
    return out;
  }

  TileGrid grid_;
  StorageMode mode_;
  std::vector<DenseTile> diag_;
  std::vector<OffDiagonalTile> lower_;
};

/// The dense-equivalent baseline is the same lower-tile layout with every
/// tile stored dense, so a dense-mode matrix reports a ratio of exactly 1.
inline Footprint footprint(const SymmetricTileMatrix& m) {
  const auto& g = m.grid();
  std::size_t dense_reals = 0;
  for (std::size_t i = 0; i < g.tiles(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) dense_reals += g.tile_size(i) * g.tile_size(j);
  }
  Footprint f;
  f.bytes_dense_equiv = dense_reals * sizeof(double);
  f.bytes_actual = m.stored_reals() * sizeof(double);
  f.compression_ratio = static_cast<double>(f.bytes_dense_equiv) / static_cast<double>(f.bytes_actual);
  return f;
}

/// One line per stored tile: `i j kind rank frob_norm`.
inline void dump_tiles(const SymmetricTileMatrix& m, std::ostream& os) {
  char buf[128];
  for (std::size_t i = 0; i < m.tiles(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      if (i == j) {
        const auto& d = m.diagonal(i);
        std::snprintf(buf, sizeof buf, "%zu %zu dense %td %.17g\n", i, j, std::min(d.rows(), d.cols()), d.norm());
      } else if (const auto* lr = std::get_if<LowRankTile>(&m.lower(i, j))) {
        std::snprintf(buf, sizeof buf, "%zu %zu lowrank %td %.17g\n", i, j, lr->rank(), lr->dense().norm());
      } else {
        const auto& d = std::get<DenseTile>(m.lower(i, j));
        std::snprintf(buf, sizeof buf, "%zu %zu dense %td %.17g\n", i, j, std::min(d.rows(), d.cols()), d.norm());
      }
      os << buf;
    }
  }
}

}  // namespace geotlr
