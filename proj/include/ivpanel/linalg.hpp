#pragma once

// Least-squares building blocks shared by the estimators and diagnostics.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "ivpanel/error.hpp"

namespace ivpanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative pivot tolerance for rank detection: a column is dependent when its
/// |R_ii| <= kRankTolerance * max |R_ii|.
inline constexpr double kRankTolerance = 1e-10;

/// Pivoted-QR least-squares factorization of a full-column-rank matrix.
///
/// Construction throws RankError listing the columns that the pivoting order
/// marks as linearly dependent on earlier ones.
class LeastSquares {
 public:
  LeastSquares(const MatrixXd& x, const std::vector<std::string>& labels,
               const std::string& module = "estimator", const std::string& op = "ols")
      : qr_(x) {
    qr_.setThreshold(kRankTolerance);
    const auto k = x.cols();
    if (x.rows() <= k)
      throw RankError(module, op,
                      "need more rows than regressors (n = " + std::to_string(x.rows()) +
                          ", k = " + std::to_string(k) + ")");
    // Eigen's threshold compares against the largest pivot; also catch the all-zero matrix.
    const double max_pivot = k > 0 ? std::fabs(qr_.matrixQR()(0, 0)) : 0.0;
    if (qr_.rank() < k || (k > 0 && max_pivot == 0.0)) {
      std::string names;
      const auto& perm = qr_.colsPermutation().indices();
      for (Eigen::Index j = qr_.rank(); j < k; ++j) {
        const auto col = static_cast<std::size_t>(perm(j));
        names += (names.empty() ? "" : ", ") + (col < labels.size() ? labels[col] : "#" + std::to_string(col));
      }
      if (names.empty()) names = "(all)";
      throw RankError(module, op, "regressors are collinear; dependent column(s): " + names);
    }
  }

  VectorXd solve(const VectorXd& y) const { return qr_.solve(y); }
  MatrixXd solve(const MatrixXd& y) const { return qr_.solve(y); }

  /// (X'X)^{-1} from the triangular factor, without forming X'X.
  MatrixXd xtx_inverse() const {
    const auto k = qr_.cols();
    const MatrixXd r = qr_.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
    const MatrixXd core = r_inv * r_inv.transpose();
    const auto& p = qr_.colsPermutation();
    return p * core * p.transpose();
  }

 private:
  Eigen::ColPivHouseholderQR<MatrixXd> qr_;
};

/// Residual-maker applied to several columns at once: returns Y - X (X'X)^{-1} X'Y.
inline MatrixXd partial_out(const LeastSquares& ls, const MatrixXd& x, const MatrixXd& y) {
  return y - x * ls.solve(y);
}

/// Moore-Penrose inverse of a symmetric matrix; eigenvalues at or below
/// tol * max|eigenvalue| are treated as zero. Sets `truncated` when any were.
inline MatrixXd pinv_symmetric(const MatrixXd& a, bool& truncated, double tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  const VectorXd& ev = es.eigenvalues();
  const double max_ev = ev.cwiseAbs().maxCoeff();
  VectorXd inv = VectorXd::Zero(ev.size());
  truncated = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (max_ev > 0.0 && std::fabs(ev(i)) > tol * max_ev) {
      inv(i) = 1.0 / ev(i);
    } else {
      truncated = true;
    }
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// Horizontal concatenation of column blocks with matching row counts.
template <typename... Blocks>
MatrixXd hcat(const Eigen::MatrixBase<Blocks>&... blocks) {
  Eigen::Index rows = 0;
  ((rows = blocks.rows()), ...);
  MatrixXd out(rows, (blocks.cols() + ... + 0));
  Eigen::Index at = 0;
  ((out.middleCols(at, blocks.cols()) = blocks, at += blocks.cols()), ...);
  return out;
}

}  // namespace ivpanel
