#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <utility>
#include <variant>

#include "geotlr/compression.hpp"
#include "geotlr/errors.hpp"
#include "geotlr/tilestore.hpp"

namespace geotlr {

/// Lower Cholesky factor on a tile grid together with log|A|.
struct CholeskyFactor {
  SymmetricTileMatrix lower;  // L stored in the lower tiles; "upper" mirroring is meaningless here
  double log_det = 0.0;

  const TileGrid& grid() const { return lower.grid(); }
  const StorageMode& mode() const { return lower.mode(); }
  std::size_t n() const { return lower.grid().n(); }

  /// Dense lower-triangular L.
  Eigen::MatrixXd densify() const { return lower.densify_lower(); }
};

/// Cholesky factor of one dense SPD tile. `tile_index` only labels errors.
inline DenseTile potrf_tile(const DenseTile& a, std::size_t tile_index = 0) {
  if (a.rows() != a.cols()) throw InputError("potrf_tile: tile must be square");
  const Eigen::Index n = a.rows();
  DenseTile l = DenseTile::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    if (j > 0) d -= l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(tile_index, static_cast<std::size_t>(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    const Eigen::Index below = n - j - 1;
    if (below == 0) continue;
    auto col = l.col(j).tail(below);
    col = a.col(j).tail(below);
    if (j > 0) col.noalias() -= l.bottomLeftCorner(below, j) * l.row(j).head(j).transpose();
    col /= ljj;
  }
  return l;
}

namespace detail {

inline double diagonal_log_sum(const DenseTile& l) { return l.diagonal().array().log().sum(); }

/// X <- X L^{-T} for lower-triangular L.
inline void trsm_right_lower_transpose(const DenseTile& l, Eigen::MatrixXd& x) {
  l.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(x);
}

}  // namespace detail

/// Right-looking tile Cholesky with every tile dense (full machine precision).
inline CholeskyFactor dense_cholesky(SymmetricTileMatrix m) {
  const std::size_t t = m.tiles();
  double log_det = 0.0;
  for (std::size_t k = 0; k < t; ++k) {
    DenseTile& akk = m.diagonal(k);
    akk = potrf_tile(akk, k);
    log_det += 2.0 * detail::diagonal_log_sum(akk);
    for (std::size_t i = k + 1; i < t; ++i) {
      auto& tile = m.lower(i, k);
      if (!std::holds_alternative<DenseTile>(tile)) tile = std::get<LowRankTile>(tile).dense();
      detail::trsm_right_lower_transpose(akk, std::get<DenseTile>(tile));
    }
    for (std::size_t j = k + 1; j < t; ++j) {
      const DenseTile& ljk = std::get<DenseTile>(m.lower(j, k));
      m.diagonal(j).selfadjointView<Eigen::Lower>().rankUpdate(ljk, -1.0);
      for (std::size_t i = j + 1; i < t; ++i) {
        auto& aij = m.lower(i, j);
        if (!std::holds_alternative<DenseTile>(aij)) aij = std::get<LowRankTile>(aij).dense();
        std::get<DenseTile>(aij).noalias() -= std::get<DenseTile>(m.lower(i, k)) * ljk.transpose();
      }
    }
  }
  // Diagonal tiles still carry the symmetric input above the diagonal.
  for (std::size_t k = 0; k < t; ++k) m.diagonal(k).triangularView<Eigen::StrictlyUpper>().setZero();
  return CholeskyFactor{std::move(m), log_det};
}

/// Right-looking tile low-rank Cholesky.
///
/// Per tile column k: factor the dense diagonal tile, apply the triangular
/// solve to the V factor of each sub-diagonal tile (rank unchanged), then
/// update the trailing matrix. Diagonal tiles are updated densely, off-diagonal
/// tiles receive the low-rank product and are recompressed to `eps` at once.
inline CholeskyFactor tlr_cholesky(SymmetricTileMatrix m, double eps) {
  if (!(eps > 0.0)) throw InputError("tlr_cholesky: accuracy must be > 0");
  const std::size_t t = m.tiles();
  // Off-diagonal tiles are expected low rank; dense ones (if any) are compressed first.
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      auto& tile = m.lower(i, j);
      if (auto* d = std::get_if<DenseTile>(&tile)) tile = compress_tile(*d, eps);
    }
  }

  double log_det = 0.0;
  for (std::size_t k = 0; k < t; ++k) {
    DenseTile& akk = m.diagonal(k);
    akk = potrf_tile(akk, k);
    log_det += 2.0 * detail::diagonal_log_sum(akk);

    for (std::size_t i = k + 1; i < t; ++i) {
      auto& lr = std::get<LowRankTile>(m.lower(i, k));
      if (lr.rank() > 0) akk.triangularView<Eigen::Lower>().solveInPlace(lr.v);
    }

    for (std::size_t j = k + 1; j < t; ++j) {
      const auto& ljk = std::get<LowRankTile>(m.lower(j, k));
      if (ljk.rank() == 0) continue;
      const Eigen::MatrixXd vtv = ljk.v.transpose() * ljk.v;
      const Eigen::MatrixXd w = ljk.u * vtv;
      m.diagonal(j).noalias() -= w * ljk.u.transpose();

      for (std::size_t i = j + 1; i < t; ++i) {
        const auto& lik = std::get<LowRankTile>(m.lower(i, k));
        if (lik.rank() == 0) continue;
        LowRankTile update(-(lik.u * (lik.v.transpose() * ljk.v)), ljk.u);
        auto& aij = std::get<LowRankTile>(m.lower(i, j));
        aij = recompress(aij, update, eps);
      }
    }
  }
  for (std::size_t k = 0; k < t; ++k) m.diagonal(k).triangularView<Eigen::StrictlyUpper>().setZero();
  return CholeskyFactor{std::move(m), log_det};
}

/// Factor according to the matrix's storage mode.
inline CholeskyFactor cholesky(SymmetricTileMatrix m) {
  if (m.mode().is_tlr()) {
    const double eps = m.mode().accuracy;
    return tlr_cholesky(std::move(m), eps);
  }
  return dense_cholesky(std::move(m));
}

namespace detail {

/// rhs_i -= tile * x  (tile is L_ij with i > j)
inline void apply_lower(const OffDiagonalTile& tile, const Eigen::MatrixXd& x, Eigen::Ref<Eigen::MatrixXd> rhs) {
  if (const auto* lr = std::get_if<LowRankTile>(&tile)) {
    if (lr->rank() == 0) return;
    rhs.noalias() -= lr->u * (lr->v.transpose() * x);
  } else {
    rhs.noalias() -= std::get<DenseTile>(tile) * x;
  }
}

/// rhs_j -= tile^T * x
inline void apply_lower_transposed(const OffDiagonalTile& tile, const Eigen::MatrixXd& x,
                                   Eigen::Ref<Eigen::MatrixXd> rhs) {
  if (const auto* lr = std::get_if<LowRankTile>(&tile)) {
    if (lr->rank() == 0) return;
    rhs.noalias() -= lr->v * (lr->u.transpose() * x);
  } else {
    rhs.noalias() -= std::get<DenseTile>(tile).transpose() * x;
  }
}

inline void check_rows(const CholeskyFactor& f, const Eigen::MatrixXd& rhs) {
  if (static_cast<std::size_t>(rhs.rows()) != f.n()) throw InputError("right-hand side row count does not match factor");
  if (rhs.cols() < 1) throw InputError("right-hand side needs at least one column");
}

}  // namespace detail

/// Solves L y = rhs by forward tile substitution.
inline Eigen::MatrixXd forward_solve(const CholeskyFactor& f, Eigen::MatrixXd rhs) {
  detail::check_rows(f, rhs);
  const auto& g = f.grid();
  const Eigen::Index q = rhs.cols();
  for (std::size_t k = 0; k < g.tiles(); ++k) {
    const auto rk = g.range(k);
    auto xk = rhs.middleRows(static_cast<Eigen::Index>(rk.begin), static_cast<Eigen::Index>(rk.size));
    f.lower.diagonal(k).triangularView<Eigen::Lower>().solveInPlace(xk);
    const Eigen::MatrixXd xk_copy = xk;
    for (std::size_t i = k + 1; i < g.tiles(); ++i) {
      const auto ri = g.range(i);
      detail::apply_lower(f.lower.lower(i, k), xk_copy,
                          rhs.block(static_cast<Eigen::Index>(ri.begin), 0, static_cast<Eigen::Index>(ri.size), q));
    }
  }
  return rhs;
}

/// Solves L^T x = rhs by backward tile substitution.
inline Eigen::MatrixXd backward_solve(const CholeskyFactor& f, Eigen::MatrixXd rhs) {
  detail::check_rows(f, rhs);
  const auto& g = f.grid();
  const Eigen::Index q = rhs.cols();
  for (std::size_t kk = g.tiles(); kk-- > 0;) {
    const auto rk = g.range(kk);
    auto xk = rhs.middleRows(static_cast<Eigen::Index>(rk.begin), static_cast<Eigen::Index>(rk.size));
    f.lower.diagonal(kk).transpose().triangularView<Eigen::Upper>().solveInPlace(xk);
    const Eigen::MatrixXd xk_copy = xk;
    for (std::size_t j = 0; j < kk; ++j) {
      const auto rj = g.range(j);
      detail::apply_lower_transposed(
          f.lower.lower(kk, j), xk_copy,
          rhs.block(static_cast<Eigen::Index>(rj.begin), 0, static_cast<Eigen::Index>(rj.size), q));
    }
  }
  return rhs;
}

/// A^{-1} rhs for A = L L^T.
inline Eigen::MatrixXd solve_cholesky(const CholeskyFactor& f, Eigen::MatrixXd rhs) {
  return backward_solve(f, forward_solve(f, std::move(rhs)));
}

/// z^T A^{-1} z computed as ||L^{-1} z||^2.
inline double quadratic_form(const CholeskyFactor& f, const Eigen::VectorXd& z) {
  if (static_cast<std::size_t>(z.size()) != f.n()) throw InputError("vector length does not match factor");
  const Eigen::MatrixXd y = forward_solve(f, Eigen::MatrixXd(z));
  return y.squaredNorm();
}

}  // namespace geotlr
