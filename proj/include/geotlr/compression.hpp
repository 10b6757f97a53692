#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "geotlr/errors.hpp"
#include "geotlr/tilestore.hpp"

namespace geotlr {

/// How a dense tile is reduced to low rank.
///
/// Svd runs a full singular value decomposition of the tile. PivotedQr runs a
/// column-pivoted Householder QR that stops as soon as the exact trailing
/// residual is below half the error budget, then truncates an SVD of the
/// small triangular factor with the remaining budget. Both honour the same
/// relative Frobenius bound; PivotedQr costs O(m n k) instead of O(m n^2).
enum class CompressionMethod { Svd, PivotedQr };

namespace detail {

/// Smallest k such that sqrt(sum_{i >= k} s_i^2) <= budget, for s sorted descending.
inline Eigen::Index truncation_rank(const Eigen::VectorXd& s, double budget) {
  const double budget2 = budget * budget;
  double tail2 = 0.0;
  Eigen::Index k = s.size();
  while (k > 0) {
    const double next = tail2 + s(k - 1) * s(k - 1);
    if (next > budget2) break;
    tail2 = next;
    --k;
  }
  return k;
}

inline void require_finite(const Eigen::MatrixXd& a, const char* what) {
  if (!a.allFinite()) throw CompressionFailure(std::string(what) + ": input has non-finite entries");
}

template <typename Svd>
LowRankTile truncate(const Svd& svd, double budget) {
  const Eigen::VectorXd& s = svd.singularValues();
  if (!s.allFinite()) throw CompressionFailure("singular value decomposition produced non-finite values");
  const Eigen::Index k = truncation_rank(s, budget);
  if (k == 0) return LowRankTile::zero(svd.rows(), svd.cols());
  Eigen::MatrixXd u = svd.matrixU().leftCols(k) * s.head(k).asDiagonal();
  Eigen::MatrixXd v = svd.matrixV().leftCols(k);
  return LowRankTile(std::move(u), std::move(v));
}

/// Truncated SVD of a (rows x cols) with absolute Frobenius tail budget.
/// Returns u scaled by singular values and v with orthonormal columns.
///
/// Divide-and-conquer SVD is fast but can lose accuracy on strongly graded
/// matrices, so the truncation error is measured and, if it misses the
/// budget, the decomposition is redone with one-sided Jacobi.
inline LowRankTile truncated_svd(const Eigen::MatrixXd& a, double budget) {
  if (a.rows() == 0 || a.cols() == 0) return LowRankTile::zero(a.rows(), a.cols());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw CompressionFailure("singular value decomposition did not converge");
  LowRankTile out = truncate(svd, budget);
  if ((a - out.dense()).norm() <= budget) return out;
  Eigen::JacobiSVD<Eigen::MatrixXd> jacobi(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (jacobi.info() != Eigen::Success) throw CompressionFailure("singular value decomposition did not converge");
  return truncate(jacobi, budget);
}

/// Column-pivoted Householder QR of a that stops once the trailing block's
/// Frobenius norm is <= stop. On return a holds the reflectors/R as in LAPACK,
/// perm the column order, and the return value is the number of steps k.
/// residual receives the exact Frobenius norm of the discarded trailing block.
inline Eigen::Index truncated_pivoted_qr(Eigen::MatrixXd& a, Eigen::VectorXd& tau, std::vector<Eigen::Index>& perm,
                                         double stop, double& residual) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  const Eigen::Index kmax = std::min(m, n);
  perm.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) perm[static_cast<std::size_t>(j)] = j;
  tau.resize(kmax);

  Eigen::VectorXd norms2 = a.colwise().squaredNorm().transpose();
  Eigen::VectorXd exact2 = norms2;  // value at last exact recomputation
  const double tol_recompute = std::sqrt(std::numeric_limits<double>::epsilon());
  Eigen::VectorXd work(n);

  residual = std::sqrt(norms2.sum());
  Eigen::Index k = 0;
  while (k < kmax) {
    // Cheap estimate first, then certify with an exact norm of the trailing block.
    const double estimate = std::sqrt(std::max(0.0, norms2.tail(n - k).sum()));
    if (estimate <= 2.0 * stop) {
      const double exact = a.bottomRightCorner(m - k, n - k).norm();
      if (exact <= stop) {
        residual = exact;
        return k;
      }
      norms2.tail(n - k) = a.bottomRightCorner(m - k, n - k).colwise().squaredNorm().transpose();
      exact2.tail(n - k) = norms2.tail(n - k);
    }

    Eigen::Index p;
    norms2.tail(n - k).maxCoeff(&p);
    p += k;
    if (p != k) {
      a.col(k).swap(a.col(p));
      std::swap(norms2(k), norms2(p));
      std::swap(exact2(k), exact2(p));
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(p)]);
    }

    double beta = 0.0;
    a.col(k).tail(m - k).makeHouseholderInPlace(tau(k), beta);
    a(k, k) = beta;
    if (k + 1 < n) {
      a.bottomRightCorner(m - k, n - k - 1)
          .applyHouseholderOnTheLeft(a.col(k).tail(m - k - 1), tau(k), work.data());
    }

    for (Eigen::Index j = k + 1; j < n; ++j) {
      const double r = a(k, j);
      double updated = norms2(j) - r * r;
      if (updated <= tol_recompute * exact2(j)) {
        updated = a.col(j).tail(m - k - 1).squaredNorm();
        exact2(j) = updated;
      }
      norms2(j) = std::max(updated, 0.0);
    }
    ++k;
  }
  residual = 0.0;
  return k;
}

/// Pivoted-QR route: QRCP to half the absolute budget, then a truncated SVD of
/// the k x cols triangular factor with whatever budget the QR left over.
inline LowRankTile pivoted_qr_truncation(const Eigen::MatrixXd& a, double budget) {
  Eigen::MatrixXd qr = a;
  Eigen::VectorXd tau;
  std::vector<Eigen::Index> perm;
  double residual = 0.0;
  const Eigen::Index k = truncated_pivoted_qr(qr, tau, perm, 0.5 * budget, residual);
  if (k == 0) return LowRankTile::zero(a.rows(), a.cols());

  // a P ~= Q_k R_k, so a ~= Q_k (R_k P^T).
  Eigen::MatrixXd r_unpermuted = Eigen::MatrixXd::Zero(k, a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const Eigen::Index rows = std::min(j + 1, k);
    r_unpermuted.col(perm[static_cast<std::size_t>(j)]).head(rows) = qr.col(j).head(rows);
  }
  const double remaining = std::sqrt(std::max(0.0, budget * budget - residual * residual));
  LowRankTile core = truncated_svd(r_unpermuted, remaining);
  if (core.rank() == 0) return LowRankTile::zero(a.rows(), a.cols());

  // Q_k * core.u without forming Q_k.
  Eigen::HouseholderSequence<Eigen::MatrixXd, Eigen::VectorXd> householder(qr, tau);
  householder.setLength(k);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(a.rows(), core.rank());
  u.topRows(k) = core.u;
  u.applyOnTheLeft(householder);
  return LowRankTile(std::move(u), std::move(core.v));
}

}  // namespace detail

/// Low-rank approximation of a dense tile with ||a - u v^T||_F <= eps ||a||_F.
inline LowRankTile compress_tile(const DenseTile& a, double eps, CompressionMethod method = CompressionMethod::Svd) {
  if (!(eps > 0.0)) throw InputError("compression accuracy must be > 0");
  detail::require_finite(a, "compress_tile");
  const double norm = a.norm();
  if (norm == 0.0 || a.rows() == 0 || a.cols() == 0) return LowRankTile::zero(a.rows(), a.cols());
  const double budget = eps * norm;
  if (method == CompressionMethod::Svd) return detail::truncated_svd(a, budget);
  return detail::pivoted_qr_truncation(a, budget);
}

/// Rank-truncated sum u1 v1^T + u2 v2^T with the same relative Frobenius
/// guarantee as compress_tile, computed without forming the dense tile.
inline LowRankTile recompress(const LowRankTile& first, const LowRankTile& second, double eps) {
  if (!(eps > 0.0)) throw InputError("compression accuracy must be > 0");
  if (first.rows() != second.rows() || first.cols() != second.cols()) {
    throw InputError("recompress: factor dimensions do not conform");
  }
  const Eigen::Index rows = first.rows();
  const Eigen::Index cols = first.cols();
  const Eigen::Index k = first.rank() + second.rank();
  if (k == 0) return LowRankTile::zero(rows, cols);

  Eigen::MatrixXd us(rows, k);
  us << first.u, second.u;
  Eigen::MatrixXd vs(cols, k);
  vs << first.v, second.v;
  detail::require_finite(us, "recompress");
  detail::require_finite(vs, "recompress");

  // us = Qu Ru, vs = Qv Rv  =>  sum = Qu (Ru Rv^T) Qv^T
  Eigen::HouseholderQR<Eigen::MatrixXd> qru(us);
  Eigen::HouseholderQR<Eigen::MatrixXd> qrv(vs);
  const Eigen::Index ku = std::min(rows, k);
  const Eigen::Index kv = std::min(cols, k);
  Eigen::MatrixXd ru = qru.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
  Eigen::MatrixXd rv = qrv.matrixQR().topRows(kv).triangularView<Eigen::Upper>();
  Eigen::MatrixXd core = ru * rv.transpose();

  // A core at the rounding level of the addends is an exact cancellation.
  const double noise = 16.0 * std::numeric_limits<double>::epsilon() *
                       (first.u.norm() * first.v.norm() + second.u.norm() * second.v.norm());
  const double norm = core.norm();
  if (norm <= noise) return LowRankTile::zero(rows, cols);
  LowRankTile small = detail::pivoted_qr_truncation(core, eps * norm);
  if (small.rank() == 0) return LowRankTile::zero(rows, cols);

  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(rows, small.rank());
  u.topRows(ku) = small.u;
  u.applyOnTheLeft(qru.householderQ());
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(cols, small.rank());
  v.topRows(kv) = small.v;
  v.applyOnTheLeft(qrv.householderQ());
  return LowRankTile(std::move(u), std::move(v));
}

}  // namespace geotlr
