#include "pubtrend/trendfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pubtrend/error.hpp"
#include "pubtrend/log.hpp"
#include "pubtrend/regression.hpp"

namespace pubtrend {

namespace {
constexpr double kNegligible = 1e-12;
}  // namespace

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogLinear: return "loglinear";
    case ModelKind::kHingeLogLinear: return "hinge";
    case ModelKind::kLinear: return "linear";
  }
  return "unknown";
}

Eigen::Index FitResult::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < coef_names.size(); ++i) {
    if (coef_names[i] == name) return static_cast<Eigen::Index>(i);
  }
  throw ValidationError("fit has no coefficient named '" + std::string(name) + "'");
}

std::optional<double> FitResult::hinge() const {
  if (model != ModelKind::kHingeLogLinear) return std::nullopt;
  return coefficients(1);
}

FitResult fit_trend(ModelKind model, const std::vector<int>& years, const Eigen::VectorXd& response,
                    const std::optional<Knot>& knot, int bandwidth) {
  if (static_cast<Eigen::Index>(years.size()) != response.size()) {
    throw ValidationError("fit_trend: years and response differ in length");
  }
  const bool hinge = model == ModelKind::kHingeLogLinear;
  if (hinge != knot.has_value()) {
    throw ValidationError("fit_trend: a knot is required for, and only for, the hinge model");
  }
  if (!response.allFinite()) throw ValidationError("fit_trend: non-finite response");

  const auto n = static_cast<Eigen::Index>(years.size());
  const Eigen::Index p = hinge ? 3 : 2;
  FitResult out;
  out.model = model;
  out.coef_names = hinge ? std::vector<std::string>{"slope", "hinge", "intercept"}
                         : std::vector<std::string>{"slope", "intercept"};
  out.years = years;
  out.response = response;
  out.n_obs = static_cast<int>(n);
  out.knot = knot;
  out.year_center =
      n > 0 ? std::accumulate(years.begin(), years.end(), 0.0) / static_cast<double>(n) : 0.0;

  Eigen::MatrixXd X(n, p);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double y = years[static_cast<std::size_t>(t)];
    X(t, 0) = y - out.year_center;
    if (hinge) X(t, 1) = std::max(y - knot->y0, 0.0);
    X(t, p - 1) = 1.0;
  }

  const auto solution = ols(X, response);
  out.bandwidth = bandwidth > 0 ? bandwidth : hac_bandwidth(n);
  const Eigen::MatrixXd hac = hac_covariance(X, solution.residuals, out.bandwidth);

  // Map the centred intercept back to calendar years: b = c - m * center.
  Eigen::MatrixXd to_raw = Eigen::MatrixXd::Identity(p, p);
  to_raw(p - 1, 0) = -out.year_center;
  out.coefficients = to_raw * solution.coefficients;
  out.classical_covariance = to_raw * solution.covariance * to_raw.transpose();
  out.hac_covariance = to_raw * hac * to_raw.transpose();
  out.residuals = solution.residuals;
  out.std_errors = out.hac_covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.classical_std_errors = out.classical_covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.t_statistics = out.coefficients.cwiseQuotient(out.std_errors);
  // A perfect fit (residuals at rounding level) leaves Durbin-Watson undefined.
  out.durbin_watson = solution.residuals.norm() > kNegligible * std::max(1.0, response.norm())
                          ? durbin_watson(solution.residuals)
                          : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Knot crossing_year(const VolumeSeries& leader, const VolumeSeries& follower) {
  if (leader.years.empty() || follower.years.empty()) {
    throw NoCrossingError("crossing_year: empty volume series");
  }
  const int first = std::max(leader.years.front(), follower.years.front());
  const int last = std::min(leader.years.back(), follower.years.back());
  if (last - first < 1) {
    throw NoCrossingError("crossing_year: series overlap in fewer than two years");
  }
  auto at = [](const VolumeSeries& s, int year) {
    return static_cast<double>(s.totals(year - s.years.front()));
  };
  if (at(follower, first) > at(leader, first)) {
    throw NoCrossingError("crossing_year: follower already above leader in " +
                          std::to_string(first) + "; the crossing precedes the data");
  }
  for (int a = first; a < last; ++a) {
    const int b = a + 1;
    const double la = at(leader, a), lb = at(leader, b);
    const double fa = at(follower, a), fb = at(follower, b);
    if (fa - la <= 0.0 && fb - lb > 0.0) {
      const double frac = (la - fa) / ((fb - fa) - (lb - la));
      Knot knot;
      knot.y0 = a + frac;
      knot.year_before = a;
      knot.year_after = b;
      knot.leader_volume = la + frac * (lb - la);
      knot.follower_volume = fa + frac * (fb - fa);
      return knot;
    }
  }
  throw NoCrossingError("crossing_year: follower never exceeds leader between " +
                        std::to_string(first) + " and " + std::to_string(last));
}

namespace {

struct LogSeries {
  std::vector<int> years;
  Eigen::VectorXd log_volume;
  std::vector<int> excluded;
};

LogSeries positive_log_series(const VolumeSeries& series) {
  LogSeries out;
  std::vector<double> values;
  for (std::size_t i = 0; i < series.years.size(); ++i) {
    const Count v = series.totals(static_cast<Eigen::Index>(i));
    if (v > 0) {
      out.years.push_back(series.years[i]);
      values.push_back(std::log(static_cast<double>(v)));
    } else {
      out.excluded.push_back(series.years[i]);
    }
  }
  out.log_volume = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                    static_cast<Eigen::Index>(values.size()));
  if (!out.excluded.empty()) {
    std::ostringstream msg;
    msg << "excluding " << out.excluded.size() << " zero-volume year(s) of '"
        << series.entity.name << "' from the log fit:";
    for (int y : out.excluded) msg << ' ' << y;
    log_warning(msg.str());
  }
  return out;
}

}  // namespace

FitResult fit_volume_loglinear(const VolumeSeries& series) {
  auto data = positive_log_series(series);
  if (data.years.size() < 3) {
    throw InsufficientDataError("log-linear fit of '" + series.entity.name +
                                "' needs at least 3 years with positive volume");
  }
  auto fit = fit_trend(ModelKind::kLogLinear, data.years, data.log_volume);
  fit.label = series.entity.name;
  fit.excluded_years = std::move(data.excluded);
  return fit;
}

FitResult fit_volume_hinge(const VolumeSeries& series, const Knot& knot) {
  auto data = positive_log_series(series);
  const auto before = std::count_if(data.years.begin(), data.years.end(),
                                    [&](int y) { return y <= knot.y0; });
  const auto after = static_cast<std::ptrdiff_t>(data.years.size()) - before;
  if (before == 0 || after == 0) {
    // Hinge column is identically zero or collinear with the trend and intercept.
    throw RankDeficientError("hinge fit of '" + series.entity.name + "': knot " +
                             std::to_string(knot.y0) +
                             " leaves no observations on one side; hinge term not identified");
  }
  if (before < 2 || after < 2) {
    throw InsufficientDataError("hinge fit of '" + series.entity.name +
                                "' needs at least 2 positive observations on each side of the knot");
  }
  auto fit = fit_trend(ModelKind::kHingeLogLinear, data.years, data.log_volume, knot);
  fit.label = series.entity.name;
  fit.excluded_years = std::move(data.excluded);
  return fit;
}

FitResult fit_lag_linear(const std::vector<MeanLagPoint>& mean_lag) {
  if (mean_lag.size() < 3) {
    throw InsufficientDataError("lag fit needs at least 3 years with a defined mean lag");
  }
  std::vector<int> years;
  Eigen::VectorXd response(static_cast<Eigen::Index>(mean_lag.size()));
  for (std::size_t i = 0; i < mean_lag.size(); ++i) {
    years.push_back(mean_lag[i].year);
    response(static_cast<Eigen::Index>(i)) = mean_lag[i].mean_lag;
  }
  auto fit = fit_trend(ModelKind::kLinear, years, response);
  fit.label = "mean_lag";
  return fit;
}

ConsistencyReport lag_slope_consistency(double leader_slope, double follower_slope,
                                        double observed_lag_slope, double observed_lag_se) {
  if (follower_slope == 0.0) {
    throw ComputationError("lag_slope_consistency: follower growth slope is zero");
  }
  ConsistencyReport out;
  out.leader_slope = leader_slope;
  out.follower_slope = follower_slope;
  out.predicted = (leader_slope - follower_slope) / follower_slope;
  out.observed = observed_lag_slope;
  out.observed_se = observed_lag_se;
  out.difference = out.predicted - out.observed;
  out.difference_in_se = out.difference / observed_lag_se;
  return out;
}

ConsistencyReport lag_slope_consistency(double leader_slope, double follower_slope,
                                        const FitResult& lag_fit) {
  return lag_slope_consistency(leader_slope, follower_slope, lag_fit.slope(), lag_fit.slope_se());
}

double zero_crossing_of_fit(const FitResult& fit) {
  if (fit.model == ModelKind::kHingeLogLinear) {
    throw ValidationError("zero_crossing_of_fit applies to straight-line fits only");
  }
  // A slope whose effect over the observed span is at rounding level counts as zero.
  const double span = fit.years.size() > 1 ? fit.years.back() - fit.years.front() : 1.0;
  const double scale = fit.response.size() > 0 ? fit.response.cwiseAbs().maxCoeff() : 0.0;
  if (std::fabs(fit.slope()) * span <= kNegligible * std::max(1.0, scale)) {
    throw ComputationError("zero_crossing_of_fit: slope is zero");
  }
  return -fit.intercept() / fit.slope();
}

}  // namespace pubtrend
