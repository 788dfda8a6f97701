#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pubtrend/corpus.hpp"
#include "pubtrend/metrics.hpp"
#include "pubtrend/trendfit.hpp"

namespace pubtrend {

inline constexpr const char* kToolVersion = PUBTREND_VERSION;

//
// Plot-ready tables. Every real value goes through csv::format_real.
//

struct ShareSeriesRow {
  EntityId entity;
  int year = 0;
  std::string keyword;
  double share = 0.0;
};

struct ShareBarRow {
  std::string keyword;
  double leader_share = 0.0;
  double follower_share = 0.0;
};

// Keywords reaching `threshold` of an entity's volume in at least one year,
// with their share in every year of positive volume.
std::vector<ShareSeriesRow> share_series(const Corpus& corpus, const EntityId& entity,
                                         double threshold);

// Keywords reaching `threshold` of either entity's volume in `year`.
// Throws ComputationError if either entity has zero volume (or no data) that year.
std::vector<ShareBarRow> share_bar(const Corpus& corpus, const EntityId& leader,
                                   const EntityId& follower, int year, double threshold);

void write_volume_table(std::ostream& out, const std::vector<VolumeSeries>& series);
void write_fit_table(std::ostream& out, const std::vector<FitResult>& fits);
void write_tvd_table(std::ostream& out, const DistanceMatrix& matrix);
void write_entropy_table(std::ostream& out, const std::vector<EntropySeries>& series);
void write_lag_table(std::ostream& out, const LagTable& table);
void write_mean_lag_table(std::ostream& out, const std::vector<MeanLagPoint>& mean);
void write_share_series_table(std::ostream& out, const std::vector<ShareSeriesRow>& rows);
void write_share_bar_table(std::ostream& out, int year, const std::vector<ShareBarRow>& rows);
void write_consistency_table(std::ostream& out, const ConsistencyReport& report);

nlohmann::ordered_json fit_metadata(const FitResult& fit);
nlohmann::ordered_json knot_metadata(const Knot& knot);

// Collects tables for one run and writes them plus metadata.json into a
// directory. Each table is registered with the corpus fingerprint and tool
// version. No wall-clock data is recorded, so identical inputs give
// byte-identical output.
class RunWriter {
 public:
  RunWriter(std::filesystem::path directory, std::string command, const Corpus* corpus);

  template <typename Fn>
  void table(const std::string& file, Fn&& write) {
    write_table(file, std::function<void(std::ostream&)>(std::forward<Fn>(write)));
  }

  nlohmann::ordered_json& metadata() { return metadata_; }
  void finish();

 private:
  void write_table(const std::string& file, const std::function<void(std::ostream&)>& write);

  std::filesystem::path directory_;
  nlohmann::ordered_json metadata_;
  nlohmann::ordered_json tables_ = nlohmann::ordered_json::array();
  std::string fingerprint_;
};

//
// Full report
//

struct ReportOptions {
  EntityId leader;
  EntityId follower;
  double series_share_threshold = 0.12;
  double bar_share_threshold = 0.01;
  std::optional<int> bar_year;  // default: last year both entities cover
  unsigned threads = 1;
  LagOptions lag;
};

struct StageStatus {
  enum class State { kOk, kSkipped, kFailed };
  std::string stage;
  State state = State::kOk;
  std::string reason;
};

struct ReportBundle {
  std::string fingerprint;
  ReportOptions options;
  std::vector<VolumeSeries> volumes;            // leader, follower
  std::vector<FitResult> fits;                  // whichever fits succeeded
  std::optional<Knot> knot;
  std::vector<DistanceMatrix> tvd;              // (L,L), (F,F), (L,F)
  std::vector<EntropySeries> entropy;           // leader, follower
  std::vector<ShareSeriesRow> share_series;
  std::optional<int> bar_year;
  std::vector<ShareBarRow> share_bar;
  LagTable lags;
  std::optional<ConsistencyReport> consistency;
  std::optional<double> lag_zero_crossing;
  std::vector<StageStatus> stages;

  bool failed() const;
};

// Runs every stage. Stages lacking data (too few observations, no crossing)
// are skipped with a reason; other numerical failures mark the stage failed.
// Throws ValidationError if either entity is absent.
ReportBundle build_report(const Corpus& corpus, const ReportOptions& options);

void write_report(const ReportBundle& bundle, const Corpus& corpus,
                  const std::filesystem::path& directory);

}  // namespace pubtrend
