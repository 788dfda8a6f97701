#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pubtrend/corpus.hpp"
#include "pubtrend/metrics.hpp"

namespace pubtrend {

enum class ModelKind {
  kLogLinear,       // ln n(y) = m y + b
  kHingeLogLinear,  // ln n(y) = m y + mu (y - y0)_+ + b
  kLinear,          // r(y) = m y + b
};

std::string_view model_name(ModelKind kind);

// Fractional year where the follower's volume first meets the leader's,
// interpolated linearly inside the bracketing pair of years.
struct Knot {
  double y0 = 0.0;
  int year_before = 0;
  int year_after = 0;
  double leader_volume = 0.0;
  double follower_volume = 0.0;
};

// All coefficients and covariances are in the raw calendar-year
// parameterization, ordered slope, [hinge], intercept. Internally the year
// regressor is centred on `year_center`; slopes and their errors do not
// depend on that choice.
//
// t_statistics use the HAC standard error. They are only asymptotically
// normal; no finite-sample t distribution is implied.
struct FitResult {
  ModelKind model = ModelKind::kLinear;
  std::string label;  // series the fit describes, e.g. an entity name
  std::vector<std::string> coef_names;
  Eigen::VectorXd coefficients;
  std::vector<int> years;
  Eigen::VectorXd response;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd classical_covariance;
  Eigen::MatrixXd hac_covariance;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd classical_std_errors;
  Eigen::VectorXd t_statistics;
  double durbin_watson = 0.0;
  int n_obs = 0;
  int bandwidth = 0;
  double year_center = 0.0;
  std::optional<Knot> knot;
  std::vector<int> excluded_years;

  Eigen::Index index_of(std::string_view name) const;
  double slope() const { return coefficients(0); }
  double intercept() const { return coefficients(coefficients.size() - 1); }
  double slope_se() const { return std_errors(0); }
  std::optional<double> hinge() const;
};

// Fits `response` against `years` (time order) with an intercept. For the
// hinge model `knot` must be set. The HAC bandwidth is ceil(sqrt(n)) unless
// `bandwidth` is positive.
FitResult fit_trend(ModelKind model, const std::vector<int>& years, const Eigen::VectorXd& response,
                    const std::optional<Knot>& knot = std::nullopt, int bandwidth = 0);

// Throws NoCrossingError when the follower never rises above the leader in
// the overlapping years, or is already above at the first overlapping year.
Knot crossing_year(const VolumeSeries& leader, const VolumeSeries& follower);

// Zero-volume years are dropped (and listed in excluded_years) before taking logs.
FitResult fit_volume_loglinear(const VolumeSeries& series);
FitResult fit_volume_hinge(const VolumeSeries& series, const Knot& knot);
FitResult fit_lag_linear(const std::vector<MeanLagPoint>& mean_lag);

struct ConsistencyReport {
  double leader_slope = 0.0;
  double follower_slope = 0.0;
  double predicted = 0.0;  // (m_leader - m_follower) / m_follower
  double observed = 0.0;
  double observed_se = 0.0;
  double difference = 0.0;  // predicted - observed
  double difference_in_se = 0.0;
};

ConsistencyReport lag_slope_consistency(double leader_slope, double follower_slope,
                                        double observed_lag_slope, double observed_lag_se);
ConsistencyReport lag_slope_consistency(double leader_slope, double follower_slope,
                                        const FitResult& lag_fit);

// Year where a straight-line fit reaches zero: -intercept / slope.
double zero_crossing_of_fit(const FitResult& fit);

}  // namespace pubtrend
