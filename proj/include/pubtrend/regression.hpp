#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "pubtrend/error.hpp"

namespace pubtrend {

template <typename Scalar>
struct OlsSolution {
  Eigen::VectorX<Scalar> coefficients;
  Eigen::VectorX<Scalar> residuals;
  Eigen::MatrixX<Scalar> xtx_inverse;  // (X'X)^-1
  Eigen::MatrixX<Scalar> covariance;   // s^2 (X'X)^-1, s^2 = RSS / (n - p)
  Scalar residual_variance = Scalar(0);
};

namespace detail {

// Columns whose pivot falls below this fraction of the largest pivot are
// treated as linearly dependent.
inline constexpr double kRankThreshold = 1e-10;

template <typename Derived>
Eigen::ColPivHouseholderQR<Eigen::MatrixX<typename Derived::Scalar>> checked_qr(
    const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  if (X.rows() <= X.cols()) {
    throw InsufficientDataError("least squares needs more observations (" +
                                std::to_string(X.rows()) + ") than regressors (" +
                                std::to_string(X.cols()) + ")");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixX<Scalar>> qr(X.rows(), X.cols());
  qr.setThreshold(Scalar(kRankThreshold));
  qr.compute(X);
  if (qr.rank() < X.cols()) {
    throw RankDeficientError("design matrix is rank deficient (rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(X.cols()) + ")");
  }
  return qr;
}

// (X'X)^-1 = P R^-1 R^-T P' from X P = Q R.
template <typename Scalar>
Eigen::MatrixX<Scalar> xtx_inverse(const Eigen::ColPivHouseholderQR<Eigen::MatrixX<Scalar>>& qr) {
  const Eigen::Index p = qr.cols();
  const Eigen::MatrixX<Scalar> r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixX<Scalar> r_inv =
      r.template triangularView<Eigen::Upper>().solve(Eigen::MatrixX<Scalar>::Identity(p, p));
  const Eigen::MatrixX<Scalar> inner = r_inv * r_inv.transpose();
  return qr.colsPermutation() * inner * qr.colsPermutation().transpose();
}

template <typename Scalar>
Eigen::MatrixX<Scalar> symmetrize_psd(const Eigen::MatrixX<Scalar>& m) {
  Eigen::MatrixX<Scalar> sym = Scalar(0.5) * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixX<Scalar>> eig(sym);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() >= Scalar(0)) return sym;
  const Eigen::VectorX<Scalar> clipped = eig.eigenvalues().cwiseMax(Scalar(0));
  sym = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return Scalar(0.5) * (sym + sym.transpose());
}

}  // namespace detail

// Ordinary least squares via column-pivoted Householder QR.
template <typename DerivedX, typename DerivedY>
OlsSolution<typename DerivedX::Scalar> ols(const Eigen::MatrixBase<DerivedX>& X,
                                           const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (X.rows() != y.size()) throw ValidationError("ols: X and y have different row counts");
  const auto qr = detail::checked_qr(X);

  OlsSolution<Scalar> out;
  out.coefficients = qr.solve(y.template cast<Scalar>());
  out.residuals = y.template cast<Scalar>() - X * out.coefficients;
  out.xtx_inverse = detail::xtx_inverse(qr);
  const Scalar dof = static_cast<Scalar>(X.rows() - X.cols());
  out.residual_variance = out.residuals.squaredNorm() / dof;
  out.covariance = detail::symmetrize_psd<Scalar>(out.residual_variance * out.xtx_inverse);
  return out;
}

// Bandwidth ceil(sqrt(n)), computed without floating point.
inline int hac_bandwidth(Eigen::Index n) {
  int b = 0;
  while (static_cast<Eigen::Index>(b) * b < n) ++b;
  return std::max(b, 1);
}

// Bartlett-kernel HAC (Newey-West) sandwich covariance
//
//   V = (X'X)^-1 S (X'X)^-1,
//   S = G_0 + sum_{j=1}^{B-1} (1 - j/B) (G_j + G_j'),
//   G_j = sum_{t=j}^{n-1} u_t u_{t-j}',  u_t = x_t e_t.
//
// No small-sample correction. With bandwidth 1 only G_0 survives, which is
// the heteroskedasticity-only (HC0) estimator. Residuals must be in time order.
template <typename DerivedX, typename DerivedE>
Eigen::MatrixX<typename DerivedX::Scalar> hac_covariance(const Eigen::MatrixBase<DerivedX>& X,
                                                         const Eigen::MatrixBase<DerivedE>& residuals,
                                                         int bandwidth) {
  using Scalar = typename DerivedX::Scalar;
  if (bandwidth < 1) throw ValidationError("hac_covariance: bandwidth must be at least 1");
  if (X.rows() != residuals.size()) {
    throw ValidationError("hac_covariance: residual count does not match design rows");
  }
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::MatrixX<Scalar> bread = detail::xtx_inverse(detail::checked_qr(X));

  Eigen::MatrixX<Scalar> u(n, p);
  for (Eigen::Index t = 0; t < n; ++t) u.row(t) = X.row(t) * residuals.coeff(t);

  Eigen::MatrixX<Scalar> meat = Eigen::MatrixX<Scalar>::Zero(p, p);
  const Eigen::Index max_lag = std::min<Eigen::Index>(bandwidth - 1, n - 1);
  for (Eigen::Index j = 0; j <= max_lag; ++j) {
    const Scalar weight = Scalar(1) - static_cast<Scalar>(j) / static_cast<Scalar>(bandwidth);
    Eigen::MatrixX<Scalar> gamma = Eigen::MatrixX<Scalar>::Zero(p, p);
    for (Eigen::Index t = j; t < n; ++t) {
      for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = 0; b < p; ++b) gamma(a, b) += u(t, a) * u(t - j, b);
      }
    }
    if (j == 0) {
      meat += gamma;
    } else {
      meat += weight * (gamma + gamma.transpose());
    }
  }
  return detail::symmetrize_psd<Scalar>(bread * meat * bread);
}

// sum_{t>=1} (e_t - e_{t-1})^2 / sum_t e_t^2. Lies in [0, 4].
template <typename Derived>
typename Derived::Scalar durbin_watson(const Eigen::MatrixBase<Derived>& residuals) {
  using Scalar = typename Derived::Scalar;
  if (residuals.size() < 2) {
    throw InsufficientDataError("durbin_watson needs at least two residuals");
  }
  Scalar num(0);
  Scalar den(0);
  for (Eigen::Index t = 0; t < residuals.size(); ++t) {
    den += residuals.coeff(t) * residuals.coeff(t);
    if (t > 0) {
      const Scalar d = residuals.coeff(t) - residuals.coeff(t - 1);
      num += d * d;
    }
  }
  if (den == Scalar(0)) throw ComputationError("durbin_watson undefined for all-zero residuals");
  return num / den;
}

}  // namespace pubtrend
