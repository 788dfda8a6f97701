#include <doctest.h>

#include <random>
#include <vector>

#include "pubtrend/error.hpp"
#include "pubtrend/regression.hpp"

using namespace pubtrend;

namespace {

using LMatrix = std::vector<std::vector<long double>>;

// Gauss-Jordan with partial pivoting, long double throughout.
LMatrix invert(LMatrix a) {
  const std::size_t n = a.size();
  LMatrix inv(n, std::vector<long double>(n, 0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[pivot][c])) pivot = r;
    }
    std::swap(a[c], a[pivot]);
    std::swap(inv[c], inv[pivot]);
    const long double d = a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] /= d;
      inv[c][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const long double f = a[r][c];
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

struct NormalEquations {
  std::vector<long double> beta;
  std::vector<long double> residuals;
  LMatrix xtx_inv;
};

NormalEquations normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = static_cast<std::size_t>(X.rows()), p = static_cast<std::size_t>(X.cols());
  LMatrix xtx(p, std::vector<long double>(p, 0));
  std::vector<long double> xty(p, 0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t a = 0; a < p; ++a) {
      xty[a] += (long double)X(t, a) * y(t);
      for (std::size_t b = 0; b < p; ++b) xtx[a][b] += (long double)X(t, a) * X(t, b);
    }
  }
  NormalEquations out;
  out.xtx_inv = invert(xtx);
  out.beta.assign(p, 0);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) out.beta[a] += out.xtx_inv[a][b] * xty[b];
  }
  for (std::size_t t = 0; t < n; ++t) {
    long double fit = 0;
    for (std::size_t a = 0; a < p; ++a) fit += X(t, a) * out.beta[a];
    out.residuals.push_back(y(t) - fit);
  }
  return out;
}

// Double-sum form: S = sum_t sum_s k(|t - s|) u_t u_s'.
LMatrix hac_oracle(const Eigen::MatrixXd& X, const std::vector<long double>& e, int bandwidth) {
  const auto n = static_cast<std::size_t>(X.rows()), p = static_cast<std::size_t>(X.cols());
  const auto ne = normal_equations(X, Eigen::VectorXd::Zero(X.rows()));
  LMatrix meat(p, std::vector<long double>(p, 0));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      const long double lag = t > s ? t - s : s - t;
      const long double w = lag < bandwidth ? 1.0L - lag / bandwidth : 0.0L;
      if (w == 0) continue;
      for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) meat[a][b] += w * X(t, a) * e[t] * X(s, b) * e[s];
      }
    }
  }
  LMatrix out(p, std::vector<long double>(p, 0));
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      for (std::size_t c = 0; c < p; ++c) {
        for (std::size_t d = 0; d < p; ++d) out[a][b] += ne.xtx_inv[a][c] * meat[c][d] * ne.xtx_inv[d][b];
      }
    }
  }
  return out;
}

Eigen::MatrixXd random_design(std::mt19937_64& rng, int n, int p) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd X(n, p);
  for (int t = 0; t < n; ++t) {
    X(t, 0) = 1.0;
    for (int j = 1; j < p; ++j) X(t, j) = z(rng) + 0.1 * t * j;
  }
  return X;
}

}  // namespace

TEST_CASE("ols agrees with long-double normal equations") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 4);
    const int n = p + 2 + static_cast<int>(rng() % 60);
    const auto X = random_design(rng, n, p);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) y(t) = X.row(t).sum() + z(rng);
    const auto fit = ols(X, y);
    const auto oracle = normal_equations(X, y);
    long double rss = 0;
    for (auto r : oracle.residuals) rss += r * r;
    const long double s2 = rss / (n - p);
    for (int a = 0; a < p; ++a) {
      REQUIRE(fit.coefficients(a) == doctest::Approx((double)oracle.beta[a]).epsilon(1e-8));
      for (int b = 0; b < p; ++b) {
        REQUIRE(fit.covariance(a, b) ==
                doctest::Approx((double)(s2 * oracle.xtx_inv[a][b])).epsilon(1e-7).scale(1e-12));
      }
    }
  }
}

TEST_CASE("residuals are orthogonal to every regressor") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 4);
    const int n = p + 3 + static_cast<int>(rng() % 80);
    const auto X = random_design(rng, n, p);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) y(t) = z(rng) * 3.0;
    const auto fit = ols(X, y);
    const Eigen::VectorXd g = X.transpose() * fit.residuals;
    REQUIRE(g.cwiseAbs().maxCoeff() < 1e-9 * (1.0 + X.cwiseAbs().maxCoeff() * y.norm()));
  }
}

TEST_CASE("hac matches the double-sum oracle") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 3);
    const int n = p + 3 + static_cast<int>(rng() % 50);
    const auto X = random_design(rng, n, p);
    Eigen::VectorXd y(n);
    double ar = 0;
    for (int t = 0; t < n; ++t) {
      ar = 0.6 * ar + z(rng);
      y(t) = X.row(t).sum() + ar;
    }
    const auto fit = ols(X, y);
    const auto oracle_fit = normal_equations(X, y);
    for (int bandwidth : {1, 2, hac_bandwidth(n), n + 5}) {
      const auto v = hac_covariance(X, fit.residuals, bandwidth);
      const auto oracle = hac_oracle(X, oracle_fit.residuals, bandwidth);
      // Bartlett weights keep the meat PSD, so no clipping should occur.
      for (int a = 0; a < p; ++a) {
        for (int b = 0; b < p; ++b) {
          REQUIRE(v(a, b) == doctest::Approx((double)oracle[a][b]).epsilon(1e-7).scale(1e-14));
        }
      }
    }
  }
}

TEST_CASE("bandwidth one is the lag-zero sandwich") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto X = random_design(rng, 40, 3);
  Eigen::VectorXd y(40);
  for (int t = 0; t < 40; ++t) y(t) = z(rng) * (1 + t % 5);
  const auto fit = ols(X, y);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
  for (int t = 0; t < 40; ++t) {
    meat += fit.residuals(t) * fit.residuals(t) * X.row(t).transpose() * X.row(t);
  }
  const Eigen::MatrixXd hc0 = fit.xtx_inverse * meat * fit.xtx_inverse;
  CHECK((hac_covariance(X, fit.residuals, 1) - hc0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("hac bandwidth is ceil(sqrt(n))") {
  CHECK(hac_bandwidth(0) == 1);
  CHECK(hac_bandwidth(1) == 1);
  CHECK(hac_bandwidth(4) == 2);
  CHECK(hac_bandwidth(5) == 3);
  CHECK(hac_bandwidth(38) == 7);
  CHECK(hac_bandwidth(57) == 8);
  CHECK(hac_bandwidth(64) == 8);
  CHECK(hac_bandwidth(65) == 9);
}

TEST_CASE("durbin-watson values") {
  Eigen::Vector4d alt(1, -1, 1, -1);
  CHECK(durbin_watson(alt) == 3.0);
  Eigen::Vector3d flat(2, 2, 2);
  CHECK(durbin_watson(flat) == 0.0);
  CHECK_THROWS_AS(durbin_watson(Eigen::VectorXd::Zero(5)), ComputationError);
  CHECK_THROWS_AS(durbin_watson(Eigen::VectorXd::Ones(1)), InsufficientDataError);

  std::mt19937_64 rng(37);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd e(2 + rng() % 50);
    for (auto& v : e) v = z(rng);
    const double dw = durbin_watson(e);
    REQUIRE(dw >= 0.0);
    REQUIRE(dw <= 4.0);
    REQUIRE(durbin_watson(Eigen::VectorXd(-e)) == doctest::Approx(dw).epsilon(1e-14));
    REQUIRE(durbin_watson(Eigen::VectorXd(3.5 * e)) == doctest::Approx(dw).epsilon(1e-13));
  }
}

TEST_CASE("ols rejects unusable designs") {
  Eigen::MatrixXd square = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(ols(square, Eigen::VectorXd::Ones(3)), InsufficientDataError);
  Eigen::MatrixXd collinear(6, 2);
  collinear.col(0).setOnes();
  collinear.col(1).setConstant(2.0);
  CHECK_THROWS_AS(ols(collinear, Eigen::VectorXd::Ones(6)), RankDeficientError);
  CHECK_THROWS_AS(ols(collinear, Eigen::VectorXd::Ones(5)), ValidationError);
  CHECK_THROWS_AS(hac_covariance(square, Eigen::VectorXd::Ones(3), 0), ValidationError);
}

TEST_CASE("templated on scalar: long double solve matches double") {
  std::mt19937_64 rng(41);
  const auto X = random_design(rng, 30, 3);
  Eigen::VectorXd y = X.rowwise().sum();
  y(3) += 0.5;
  const auto d = ols(X, y);
  const auto l = ols(Eigen::MatrixX<long double>(X.cast<long double>()),
                     Eigen::VectorX<long double>(y.cast<long double>()));
  for (int i = 0; i < 3; ++i) CHECK((double)l.coefficients(i) == doctest::Approx(d.coefficients(i)));
}

TEST_CASE("exact line through three points") {
  Eigen::MatrixXd X(3, 2);
  X << 0, 1, 1, 1, 2, 1;
  const auto fit = ols(X, Eigen::Vector3d(1, 3, 5));
  CHECK(fit.coefficients(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fit.coefficients(1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("white noise: HAC and classical standard errors agree on average") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> z(0.0, 1.0);
  const int n = 2000, reps = 100;
  Eigen::MatrixXd X(n, 2);
  for (int t = 0; t < n; ++t) X.row(t) << (t - n / 2) / 100.0, 1.0;
  double hac = 0, classical = 0;
  for (int r = 0; r < reps; ++r) {
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) y(t) = 0.5 * X(t, 0) + z(rng);
    const auto fit = ols(X, y);
    hac += std::sqrt(hac_covariance(X, fit.residuals, hac_bandwidth(n))(0, 0)) / reps;
    classical += std::sqrt(fit.covariance(0, 0)) / reps;
  }
  CHECK(std::fabs(hac / classical - 1.0) < 0.10);
}
