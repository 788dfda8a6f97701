#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <vector>

#include "pubtrend/corpus.hpp"

namespace pubtrend {

//
// Dense kernels. These take any Eigen vector expression and sum over
// coefficients left to right, so a given pair of inputs always produces the
// same bits no matter which thread evaluates it.
//

// Half the l1 distance between two share vectors.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar total_variation(const Eigen::MatrixBase<DerivedP>& p,
                                          const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  eigen_assert(p.size() == q.size());
  Scalar sum(0);
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    sum += std::abs(p.coeff(k) - q.coeff(k));
  }
  return Scalar(0.5) * sum;
}

// Shannon entropy in nats with 0 ln 0 = 0.
template <typename Derived>
typename Derived::Scalar shannon_entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar sum(0);
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const Scalar pk = p.coeff(k);
    if (pk > Scalar(0)) sum -= pk * std::log(pk);
  }
  return sum;
}

// Normalises a count vector to unit sum. The caller guarantees a positive total.
template <typename Derived>
Eigen::VectorXd normalize_counts(const Eigen::MatrixBase<Derived>& counts) {
  const auto total = counts.sum();
  eigen_assert(total > 0);
  return counts.template cast<double>() / static_cast<double>(total);
}

//
// Corpus-level metrics.
//

struct ShareDistribution {
  EntityId entity;
  int year = 0;
  Eigen::VectorXd shares;
  Count sample_size = 0;
  Corpus::KeywordList keywords;
};

ShareDistribution keyword_shares(const Corpus& corpus, const EntityId& entity, int year);

// Throws ValidationError when the two distributions are over different keyword lists.
double tvd(const ShareDistribution& p, const ShareDistribution& q);

double entropy(const ShareDistribution& p);

// values(i, j) = tvd(shares(row entity, years_row[i]), shares(col entity, years_col[j])).
// Cells where either distribution is undefined hold NaN and defined(i, j) = false.
struct DistanceMatrix {
  EntityId entity_row;
  EntityId entity_col;
  std::vector<int> years_row;
  std::vector<int> years_col;
  Eigen::MatrixXd values;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
};

// `threads` > 1 splits rows across workers; output is identical either way.
DistanceMatrix tvd_matrix(const Corpus& corpus, const EntityId& entity_row,
                          const EntityId& entity_col, unsigned threads = 1);

struct EntropyPoint {
  int year = 0;
  double entropy = 0.0;
  Count sample_size = 0;
};

struct EntropySeries {
  EntityId entity;
  std::vector<EntropyPoint> points;
};

// Years with zero volume are omitted.
EntropySeries entropy_series(const Corpus& corpus, const EntityId& entity);

//
// Lag between a leader and a follower.
//
// The lag at year y is the smallest integer d in
// [first_year(follower) - y, last_year(follower) - y] such that the follower's
// count at y + d meets or exceeds the leader's count at y. Negative values
// mean the follower was already ahead. If no year in the follower's range
// qualifies the lag is undefined (no extrapolation past the last year).
//

struct LagValue {
  std::optional<int> lag;
  // Leader count was 0, so every follower year qualifies and the lag is the
  // window minimum.
  bool zero_threshold = false;

  bool defined() const { return lag.has_value(); }
};

LagValue lag(const Corpus& corpus, const EntityId& leader, const EntityId& follower,
             std::string_view keyword, int year);

struct LagRow {
  std::size_t keyword = 0;
  int year = 0;
  LagValue value;
};

struct MeanLagPoint {
  int year = 0;
  double mean_lag = 0.0;
  int keywords_defined = 0;  // m(y)
};

struct LagOptions {
  // Leave zero-threshold lags out of the keyword average. Off by default: they
  // are defined lags under the literal rule.
  bool exclude_zero_threshold = false;
};

struct LagTable {
  EntityId leader;
  EntityId follower;
  Corpus::KeywordList keywords;
  std::vector<LagRow> rows;  // keyword-major, years ascending
  std::vector<MeanLagPoint> mean;
};

LagTable lag_table(const Corpus& corpus, const EntityId& leader, const EntityId& follower,
                   const LagOptions& options = {});

// Years where no keyword has a defined lag are omitted.
std::vector<MeanLagPoint> mean_lag(const Corpus& corpus, const EntityId& leader,
                                   const EntityId& follower, const LagOptions& options = {});

}  // namespace pubtrend
