#include "pubtrend/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pubtrend/csv.hpp"
#include "pubtrend/error.hpp"
#include "pubtrend/log.hpp"

namespace pubtrend {

using nlohmann::ordered_json;
using csv::format_real;

namespace {

ordered_json number(double value) {
  if (!std::isfinite(value)) return nullptr;
  return std::stod(format_real(value));
}

std::string flag(bool value) { return value ? "1" : "0"; }

}  // namespace

std::vector<ShareSeriesRow> share_series(const Corpus& corpus, const EntityId& entity,
                                         double threshold) {
  const auto& table = corpus.table(entity);
  const auto& keywords = corpus.keywords();
  const Eigen::Index k = table.counts.cols();
  std::vector<Eigen::Index> selected;
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index r = 0; r < table.counts.rows(); ++r) {
      const Count total = table.counts.row(r).sum();
      if (total > 0 && static_cast<double>(table.counts(r, c)) / total >= threshold) {
        selected.push_back(c);
        break;
      }
    }
  }
  std::vector<ShareSeriesRow> rows;
  for (const Eigen::Index c : selected) {
    for (int year = table.years.first; year <= table.years.last; ++year) {
      const Count total = table.counts.row(table.row(year)).sum();
      if (total <= 0) continue;
      rows.push_back({entity, year, keywords[static_cast<std::size_t>(c)],
                      static_cast<double>(table.counts(table.row(year), c)) / total});
    }
  }
  return rows;
}

std::vector<ShareBarRow> share_bar(const Corpus& corpus, const EntityId& leader,
                                   const EntityId& follower, int year, double threshold) {
  const auto lead = keyword_shares(corpus, leader, year);
  const auto follow = keyword_shares(corpus, follower, year);
  std::vector<ShareBarRow> rows;
  for (Eigen::Index c = 0; c < lead.shares.size(); ++c) {
    if (lead.shares(c) >= threshold || follow.shares(c) >= threshold) {
      rows.push_back({corpus.keywords()[static_cast<std::size_t>(c)], lead.shares(c),
                      follow.shares(c)});
    }
  }
  return rows;
}

void write_volume_table(std::ostream& out, const std::vector<VolumeSeries>& series) {
  out << "entity,year,volume\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.years.size(); ++i) {
      csv::write_record(out, {s.entity.name, std::to_string(s.years[i]),
                              std::to_string(s.totals(static_cast<Eigen::Index>(i)))});
    }
  }
}

void write_fit_table(std::ostream& out, const std::vector<FitResult>& fits) {
  out << "model,coef_name,estimate,hac_se,t_stat\n";
  for (const auto& fit : fits) {
    const std::string model = std::string(model_name(fit.model)) + ":" + fit.label;
    for (std::size_t i = 0; i < fit.coef_names.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      csv::write_record(out, {model, fit.coef_names[i], format_real(fit.coefficients(c)),
                              format_real(fit.std_errors(c)), format_real(fit.t_statistics(c))});
    }
  }
}

void write_tvd_table(std::ostream& out, const DistanceMatrix& m) {
  out << "entity_row,entity_col,year_row,year_col,tvd,defined\n";
  for (std::size_t i = 0; i < m.years_row.size(); ++i) {
    for (std::size_t j = 0; j < m.years_col.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      csv::write_record(out, {m.entity_row.name, m.entity_col.name, std::to_string(m.years_row[i]),
                              std::to_string(m.years_col[j]),
                              m.defined(r, c) ? format_real(m.values(r, c)) : std::string(),
                              flag(m.defined(r, c))});
    }
  }
}

void write_entropy_table(std::ostream& out, const std::vector<EntropySeries>& series) {
  out << "entity,year,entropy,sample_size\n";
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      csv::write_record(out, {s.entity.name, std::to_string(p.year), format_real(p.entropy),
                              std::to_string(p.sample_size)});
    }
  }
}

void write_lag_table(std::ostream& out, const LagTable& table) {
  out << "keyword,year,lag,defined,flag_zero_threshold\n";
  for (const auto& row : table.rows) {
    csv::write_record(out, {(*table.keywords)[row.keyword], std::to_string(row.year),
                            row.value.lag ? std::to_string(*row.value.lag) : std::string(),
                            flag(row.value.defined()), flag(row.value.zero_threshold)});
  }
}

void write_mean_lag_table(std::ostream& out, const std::vector<MeanLagPoint>& mean) {
  out << "year,mean_lag,m\n";
  for (const auto& p : mean) {
    csv::write_record(out, {std::to_string(p.year), format_real(p.mean_lag),
                            std::to_string(p.keywords_defined)});
  }
}

void write_share_series_table(std::ostream& out, const std::vector<ShareSeriesRow>& rows) {
  out << "entity,year,keyword,share\n";
  for (const auto& r : rows) {
    csv::write_record(out, {r.entity.name, std::to_string(r.year), r.keyword, format_real(r.share)});
  }
}

void write_share_bar_table(std::ostream& out, int year, const std::vector<ShareBarRow>& rows) {
  out << "year,keyword,leader_share,follower_share\n";
  for (const auto& r : rows) {
    csv::write_record(out, {std::to_string(year), r.keyword, format_real(r.leader_share),
                            format_real(r.follower_share)});
  }
}

void write_consistency_table(std::ostream& out, const ConsistencyReport& r) {
  out << "leader_slope,follower_slope,predicted,observed,observed_se,difference,difference_in_se\n";
  csv::write_record(out, {format_real(r.leader_slope), format_real(r.follower_slope),
                          format_real(r.predicted), format_real(r.observed),
                          format_real(r.observed_se), format_real(r.difference),
                          format_real(r.difference_in_se)});
}

ordered_json knot_metadata(const Knot& knot) {
  return ordered_json{{"y0", number(knot.y0)},
                      {"year_before", knot.year_before},
                      {"year_after", knot.year_after},
                      {"leader_volume", number(knot.leader_volume)},
                      {"follower_volume", number(knot.follower_volume)}};
}

ordered_json fit_metadata(const FitResult& fit) {
  ordered_json out{{"model", model_name(fit.model)},
                   {"series", fit.label},
                   {"n_obs", fit.n_obs},
                   {"bandwidth", fit.bandwidth},
                   {"durbin_watson", number(fit.durbin_watson)},
                   {"year_center", number(fit.year_center)},
                   {"first_year", fit.years.empty() ? 0 : fit.years.front()},
                   {"last_year", fit.years.empty() ? 0 : fit.years.back()},
                   {"excluded_years", fit.excluded_years}};
  ordered_json classical = ordered_json::object();
  for (std::size_t i = 0; i < fit.coef_names.size(); ++i) {
    classical[fit.coef_names[i]] = number(fit.classical_std_errors(static_cast<Eigen::Index>(i)));
  }
  out["classical_se"] = std::move(classical);
  out["knot"] = fit.knot ? knot_metadata(*fit.knot) : ordered_json(nullptr);
  return out;
}

RunWriter::RunWriter(std::filesystem::path directory, std::string command, const Corpus* corpus)
    : directory_(std::move(directory)) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (ec) throw IoError("cannot create output directory '" + directory_.string() + "'");
  if (corpus) fingerprint_ = corpus->fingerprint();
  metadata_["tool"] = "pubtrend";
  metadata_["version"] = kToolVersion;
  metadata_["command"] = std::move(command);
  metadata_["corpus_fingerprint"] = fingerprint_;
}

void RunWriter::write_table(const std::string& file,
                            const std::function<void(std::ostream&)>& write) {
  std::ostringstream buffer;
  write(buffer);
  const std::string text = buffer.str();
  const auto lines = std::count(text.begin(), text.end(), '\n');
  const auto path = directory_ / file;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  tables_.push_back({{"file", file},
                     {"rows", std::max<std::ptrdiff_t>(lines - 1, 0)},
                     {"corpus_fingerprint", fingerprint_},
                     {"version", kToolVersion}});
}

void RunWriter::finish() {
  metadata_["tables"] = tables_;
  const auto path = directory_ / "metadata.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << metadata_.dump(2) << '\n';
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

//
// Report
//

bool ReportBundle::failed() const {
  return std::any_of(stages.begin(), stages.end(), [](const StageStatus& s) {
    return s.state == StageStatus::State::kFailed;
  });
}

namespace {

template <typename Fn>
void run_stage(std::vector<StageStatus>& stages, const std::string& name, Fn&& fn) {
  StageStatus status{name, StageStatus::State::kOk, {}};
  try {
    fn();
  } catch (const InsufficientDataError& e) {
    status = {name, StageStatus::State::kSkipped, e.what()};
  } catch (const NoCrossingError& e) {
    status = {name, StageStatus::State::kSkipped, e.what()};
  } catch (const ComputationError& e) {
    status = {name, StageStatus::State::kFailed, e.what()};
  }
  switch (status.state) {
    case StageStatus::State::kOk: log_info("stage " + name + ": ok"); break;
    case StageStatus::State::kSkipped:
      log_warning("stage " + name + ": skipped (" + status.reason + ")");
      break;
    case StageStatus::State::kFailed:
      log_error("stage " + name + ": failed (" + status.reason + ")");
      break;
  }
  stages.push_back(std::move(status));
}

std::string_view state_name(StageStatus::State state) {
  switch (state) {
    case StageStatus::State::kOk: return "ok";
    case StageStatus::State::kSkipped: return "skipped";
    case StageStatus::State::kFailed: return "failed";
  }
  return "?";
}

const FitResult* find_fit(const std::vector<FitResult>& fits, ModelKind model,
                          const std::string& label) {
  for (const auto& fit : fits) {
    if (fit.model == model && fit.label == label) return &fit;
  }
  return nullptr;
}

}  // namespace

ReportBundle build_report(const Corpus& corpus, const ReportOptions& options) {
  const auto& leader = options.leader;
  const auto& follower = options.follower;
  for (const auto* e : {&leader, &follower}) {
    if (!corpus.has_entity(*e)) throw ValidationError("unknown entity '" + e->name + "'");
  }
  if (leader == follower) throw ValidationError("leader and follower must differ");

  ReportBundle bundle;
  bundle.fingerprint = corpus.fingerprint();
  bundle.options = options;
  auto& stages = bundle.stages;
  log_info("thresholds: series share >= " + format_real(options.series_share_threshold) +
           ", bar share >= " + format_real(options.bar_share_threshold));

  bundle.volumes = {total_volume(corpus, leader), total_volume(corpus, follower)};

  run_stage(stages, "crossing_year",
            [&] { bundle.knot = crossing_year(bundle.volumes[0], bundle.volumes[1]); });
  run_stage(stages, "fit_leader_volume",
            [&] { bundle.fits.push_back(fit_volume_loglinear(bundle.volumes[0])); });
  run_stage(stages, "fit_follower_volume", [&] {
    if (bundle.knot) {
      bundle.fits.push_back(fit_volume_hinge(bundle.volumes[1], *bundle.knot));
    } else {
      log_warning("no crossing year; fitting the follower without a hinge");
      bundle.fits.push_back(fit_volume_loglinear(bundle.volumes[1]));
    }
  });

  run_stage(stages, "tvd", [&] {
    bundle.tvd.push_back(tvd_matrix(corpus, leader, leader, options.threads));
    bundle.tvd.push_back(tvd_matrix(corpus, follower, follower, options.threads));
    bundle.tvd.push_back(tvd_matrix(corpus, leader, follower, options.threads));
  });
  run_stage(stages, "entropy", [&] {
    bundle.entropy = {entropy_series(corpus, leader), entropy_series(corpus, follower)};
  });
  run_stage(stages, "share_series", [&] {
    bundle.share_series = share_series(corpus, leader, options.series_share_threshold);
    auto more = share_series(corpus, follower, options.series_share_threshold);
    bundle.share_series.insert(bundle.share_series.end(), more.begin(), more.end());
  });
  run_stage(stages, "share_bar", [&] {
    int year = 0;
    if (options.bar_year) {
      year = *options.bar_year;
    } else {
      year = std::min(corpus.years(leader).last, corpus.years(follower).last);
    }
    const auto volume_at = [&](const EntityId& e) -> Count {
      const auto& t = corpus.table(e);
      return t.years.contains(year) ? t.counts.row(t.row(year)).sum() : 0;
    };
    if (volume_at(leader) <= 0 || volume_at(follower) <= 0) {
      throw InsufficientDataError("no volume for both entities in " + std::to_string(year));
    }
    bundle.share_bar = share_bar(corpus, leader, follower, year, options.bar_share_threshold);
    bundle.bar_year = year;
  });

  run_stage(stages, "lag", [&] { bundle.lags = lag_table(corpus, leader, follower, options.lag); });
  run_stage(stages, "fit_lag", [&] {
    bundle.fits.push_back(fit_lag_linear(bundle.lags.mean));
    try {
      bundle.lag_zero_crossing = zero_crossing_of_fit(bundle.fits.back());
    } catch (const ComputationError& e) {
      log_warning(std::string("lag fit has no zero crossing: ") + e.what());
    }
  });

  run_stage(stages, "consistency", [&] {
    const auto* lead_fit = find_fit(bundle.fits, ModelKind::kLogLinear, leader.name);
    const auto* follow_fit = find_fit(bundle.fits, ModelKind::kHingeLogLinear, follower.name);
    if (!follow_fit) follow_fit = find_fit(bundle.fits, ModelKind::kLogLinear, follower.name);
    const auto* lag_fit = find_fit(bundle.fits, ModelKind::kLinear, "mean_lag");
    if (!lead_fit || !follow_fit || !lag_fit) {
      throw InsufficientDataError("volume or lag fit unavailable");
    }
    bundle.consistency = lag_slope_consistency(lead_fit->slope(), follow_fit->slope(), *lag_fit);
  });
  return bundle;
}

void write_report(const ReportBundle& bundle, const Corpus& corpus,
                  const std::filesystem::path& directory) {
  const auto& opt = bundle.options;
  RunWriter run(directory, "report", &corpus);
  auto& meta = run.metadata();
  meta["leader"] = opt.leader.name;
  meta["follower"] = opt.follower.name;
  meta["thresholds"] = {{"series_share", number(opt.series_share_threshold)},
                        {"bar_share", number(opt.bar_share_threshold)},
                        {"bar_year", bundle.bar_year ? ordered_json(*bundle.bar_year)
                                                     : ordered_json(nullptr)}};
  meta["lag"] = {{"exclude_zero_threshold", opt.lag.exclude_zero_threshold}};
  meta["hac"] = {{"kernel", "bartlett"}, {"bandwidth", "ceil(sqrt(n))"},
                 {"small_sample_correction", false}};

  ordered_json stages = ordered_json::array();
  for (const auto& s : bundle.stages) {
    stages.push_back({{"stage", s.stage}, {"status", state_name(s.state)}, {"reason", s.reason}});
  }
  meta["stages"] = std::move(stages);
  ordered_json fits = ordered_json::array();
  for (const auto& fit : bundle.fits) fits.push_back(fit_metadata(fit));
  meta["fits"] = std::move(fits);
  meta["knot"] = bundle.knot ? knot_metadata(*bundle.knot) : ordered_json(nullptr);
  meta["catch_up"] = {
      {"volume_crossing_year", bundle.knot ? number(bundle.knot->y0) : ordered_json(nullptr)},
      {"lag_zero_crossing_year",
       bundle.lag_zero_crossing ? number(*bundle.lag_zero_crossing) : ordered_json(nullptr)}};

  run.table("volume.csv", [&](std::ostream& out) { write_volume_table(out, bundle.volumes); });
  run.table("fits.csv", [&](std::ostream& out) { write_fit_table(out, bundle.fits); });
  static constexpr const char* kTvdFiles[] = {"tvd_leader_leader.csv", "tvd_follower_follower.csv",
                                              "tvd_leader_follower.csv"};
  for (std::size_t i = 0; i < 3; ++i) {
    run.table(kTvdFiles[i], [&](std::ostream& out) {
      if (i < bundle.tvd.size()) {
        write_tvd_table(out, bundle.tvd[i]);
      } else {
        out << "entity_row,entity_col,year_row,year_col,tvd,defined\n";
      }
    });
  }
  run.table("entropy.csv", [&](std::ostream& out) { write_entropy_table(out, bundle.entropy); });
  run.table("shares_series.csv",
            [&](std::ostream& out) { write_share_series_table(out, bundle.share_series); });
  run.table("shares_bar.csv", [&](std::ostream& out) {
    write_share_bar_table(out, bundle.bar_year.value_or(0), bundle.share_bar);
  });
  run.table("lag_table.csv", [&](std::ostream& out) {
    if (bundle.lags.keywords) {
      write_lag_table(out, bundle.lags);
    } else {
      out << "keyword,year,lag,defined,flag_zero_threshold\n";
    }
  });
  run.table("mean_lag.csv", [&](std::ostream& out) { write_mean_lag_table(out, bundle.lags.mean); });
  run.table("consistency.csv", [&](std::ostream& out) {
    if (bundle.consistency) {
      write_consistency_table(out, *bundle.consistency);
    } else {
      out << "leader_slope,follower_slope,predicted,observed,observed_se,difference,"
             "difference_in_se\n";
    }
  });
  run.finish();
}

}  // namespace pubtrend
