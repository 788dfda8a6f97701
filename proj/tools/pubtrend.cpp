// pubtrend command-line front end.
//
// Exit codes: 0 success, 1 validation error, 2 computation error, 3 I/O error.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "pubtrend/corpus.hpp"
#include "pubtrend/csv.hpp"
#include "pubtrend/error.hpp"
#include "pubtrend/harvester.hpp"
#include "pubtrend/log.hpp"
#include "pubtrend/metrics.hpp"
#include "pubtrend/report.hpp"
#include "pubtrend/synth.hpp"
#include "pubtrend/trendfit.hpp"

namespace {

using namespace pubtrend;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitComputation = 2;
constexpr int kExitIo = 3;

struct GlobalOptions {
  std::string input;
  std::string output_dir = ".";
  std::string leader;
  std::string follower;
  std::optional<std::uint64_t> seed;
  std::string config;
  unsigned threads = 1;
};

struct FitOptions {
  std::string model = "loglinear";
  std::string entity;
  std::string knot = "auto";
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationError(std::string("missing required flag ") + flag);
}

Corpus input_corpus(const GlobalOptions& g) {
  require(g.input, "--input");
  return load_corpus(g.input);
}

EntityId entity_flag(const Corpus& corpus, const std::string& name, const char* flag) {
  require(name, flag);
  EntityId id{name};
  if (!corpus.has_entity(id)) {
    throw ValidationError(std::string(flag) + ": unknown entity '" + name + "'");
  }
  return id;
}

void note_pair(RunWriter& run, const EntityId& leader, const EntityId& follower) {
  run.metadata()["leader"] = leader.name;
  run.metadata()["follower"] = follower.name;
}

int cmd_ingest(const GlobalOptions& g) {
  const Corpus corpus = input_corpus(g);
  RunWriter run(g.output_dir, "ingest", &corpus);
  run.table("corpus.csv", [&](std::ostream& out) { write_corpus(out, corpus); });
  run.finish();

  std::cout << "entities: " << corpus.tables().size() << '\n';
  for (const auto& t : corpus.tables()) {
    std::cout << "  " << t.entity.name << ' ' << t.years.first << '-' << t.years.last << '\n';
  }
  std::cout << "keywords: " << corpus.keyword_count() << '\n';
  std::cout << "fingerprint: " << corpus.fingerprint() << '\n';
  return kExitOk;
}

int cmd_harvest(const GlobalOptions& g, const std::string& policy_name) {
  require(g.config, "--config");
  MissingPolicy policy;
  if (policy_name == "fail") {
    policy = MissingPolicy::kFail;
  } else if (policy_name == "zero") {
    policy = MissingPolicy::kFillZero;
  } else {
    throw ValidationError("--missing-policy must be 'fail' or 'zero'");
  }
  const QueryPlan plan = load_query_plan(g.config);
  log_info("coverage: " + plan.coverage_note);
  auto transport = make_transport(plan);
  const HarvestOutcome outcome = execute_plan(plan, *transport);

  std::filesystem::create_directories(g.output_dir);
  append_provenance(std::filesystem::path(g.output_dir) / "provenance.csv", outcome.records);
  log_info("transport calls: " + std::to_string(outcome.transport_calls) +
           ", cache hits: " + std::to_string(outcome.cache_hits) +
           ", missing: " + std::to_string(outcome.missing()));

  const Corpus corpus = assemble_corpus(plan, outcome, policy);
  RunWriter run(g.output_dir, "harvest", &corpus);
  run.metadata()["coverage_note"] = plan.coverage_note;
  run.metadata()["missing_policy"] = policy_name;
  run.metadata()["missing_cells"] = outcome.missing();
  run.table("corpus.csv", [&](std::ostream& out) { write_corpus(out, corpus); });
  run.finish();
  std::cout << "cells: " << outcome.records.size() << ", missing: " << outcome.missing() << '\n';
  return kExitOk;
}

int cmd_synth(const GlobalOptions& g) {
  require(g.config, "--config");
  const std::string text = read_text(g.config);
  std::string resolved;
  const Corpus corpus = [&] {
    if (is_heterogeneous_spec(text)) {
      auto spec = parse_heterogeneous_spec(text);
      if (g.seed) spec.seed = *g.seed;
      resolved = to_json_text(spec);
      return generate_heterogeneous(spec);
    }
    auto spec = parse_growth_spec(text);
    if (g.seed) spec.seed = *g.seed;
    resolved = to_json_text(spec);
    return generate_corpus(spec);
  }();
  RunWriter run(g.output_dir, "synth", &corpus);
  run.metadata()["spec"] = nlohmann::ordered_json::parse(resolved);
  run.table("corpus.csv", [&](std::ostream& out) { write_corpus(out, corpus); });
  run.finish();
  std::cout << "fingerprint: " << corpus.fingerprint() << '\n';
  return kExitOk;
}

Knot knot_from_flag(const Corpus& corpus, const GlobalOptions& g, const std::string& flag) {
  if (flag == "auto") {
    const auto leader = entity_flag(corpus, g.leader, "--leader");
    const auto follower = entity_flag(corpus, g.follower, "--follower");
    return crossing_year(total_volume(corpus, leader), total_volume(corpus, follower));
  }
  double y0 = 0.0;
  try {
    std::size_t used = 0;
    y0 = std::stod(flag, &used);
    if (used != flag.size()) throw std::invalid_argument(flag);
  } catch (const std::exception&) {
    throw ValidationError("--knot must be 'auto' or a year, got '" + flag + "'");
  }
  if (!std::isfinite(y0)) throw ValidationError("--knot must be finite");
  Knot knot;
  knot.y0 = y0;
  knot.year_before = static_cast<int>(std::floor(y0));
  knot.year_after = knot.year_before + 1;
  return knot;
}

int cmd_fit(const GlobalOptions& g, const FitOptions& f) {
  const Corpus corpus = input_corpus(g);
  FitResult fit;
  std::optional<Knot> knot;
  if (f.model == "loglinear") {
    const auto entity = entity_flag(corpus, f.entity.empty() ? g.leader : f.entity, "--entity");
    fit = fit_volume_loglinear(total_volume(corpus, entity));
  } else if (f.model == "hinge") {
    const auto entity = entity_flag(corpus, f.entity.empty() ? g.follower : f.entity, "--entity");
    knot = knot_from_flag(corpus, g, f.knot);
    log_info("knot y0 = " + csv::format_real(knot->y0));
    fit = fit_volume_hinge(total_volume(corpus, entity), *knot);
  } else if (f.model == "lag") {
    const auto leader = entity_flag(corpus, g.leader, "--leader");
    const auto follower = entity_flag(corpus, g.follower, "--follower");
    fit = fit_lag_linear(mean_lag(corpus, leader, follower));
  } else {
    throw ValidationError("--model must be loglinear, hinge or lag");
  }

  RunWriter run(g.output_dir, "fit", &corpus);
  run.metadata()["fits"] = nlohmann::ordered_json::array({fit_metadata(fit)});
  run.metadata()["knot"] = knot ? knot_metadata(*knot) : nlohmann::ordered_json(nullptr);
  run.table("fits.csv", [&](std::ostream& out) { write_fit_table(out, {fit}); });
  run.finish();
  return kExitOk;
}

int cmd_lag(const GlobalOptions& g, bool exclude_zero_threshold) {
  const Corpus corpus = input_corpus(g);
  const auto leader = entity_flag(corpus, g.leader, "--leader");
  const auto follower = entity_flag(corpus, g.follower, "--follower");
  LagOptions options;
  options.exclude_zero_threshold = exclude_zero_threshold;
  const LagTable table = lag_table(corpus, leader, follower, options);

  RunWriter run(g.output_dir, "lag", &corpus);
  note_pair(run, leader, follower);
  run.metadata()["lag"] = {{"exclude_zero_threshold", exclude_zero_threshold}};
  run.table("lag_table.csv", [&](std::ostream& out) { write_lag_table(out, table); });
  run.table("mean_lag.csv", [&](std::ostream& out) { write_mean_lag_table(out, table.mean); });
  run.finish();
  return kExitOk;
}

int cmd_tvd(const GlobalOptions& g) {
  const Corpus corpus = input_corpus(g);
  const auto leader = entity_flag(corpus, g.leader, "--leader");
  const auto follower = entity_flag(corpus, g.follower, "--follower");
  RunWriter run(g.output_dir, "tvd", &corpus);
  note_pair(run, leader, follower);
  const std::pair<EntityId, EntityId> pairs[] = {
      {leader, leader}, {follower, follower}, {leader, follower}};
  const char* files[] = {"tvd_leader_leader.csv", "tvd_follower_follower.csv",
                         "tvd_leader_follower.csv"};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto m = tvd_matrix(corpus, pairs[i].first, pairs[i].second, g.threads);
    run.table(files[i], [&](std::ostream& out) { write_tvd_table(out, m); });
  }
  run.finish();
  return kExitOk;
}

int cmd_entropy(const GlobalOptions& g) {
  const Corpus corpus = input_corpus(g);
  std::vector<EntropySeries> series;
  if (g.leader.empty() && g.follower.empty()) {
    for (const auto& e : corpus.entities()) series.push_back(entropy_series(corpus, e));
  } else {
    for (const auto* name : {&g.leader, &g.follower}) {
      if (!name->empty()) series.push_back(entropy_series(corpus, entity_flag(corpus, *name, "--entity")));
    }
  }
  RunWriter run(g.output_dir, "entropy", &corpus);
  run.table("entropy.csv", [&](std::ostream& out) { write_entropy_table(out, series); });
  run.finish();
  return kExitOk;
}

int cmd_report(const GlobalOptions& g, ReportOptions options) {
  const Corpus corpus = input_corpus(g);
  options.leader = entity_flag(corpus, g.leader, "--leader");
  options.follower = entity_flag(corpus, g.follower, "--follower");
  options.threads = g.threads;
  const ReportBundle bundle = build_report(corpus, options);
  write_report(bundle, corpus, g.output_dir);
  return bundle.failed() ? kExitComputation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Publication trend toolkit: corpus ingestion, growth fits, lags and divergence"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--input", g.input, "Corpus CSV (entity,year,keyword,count)");
  app.add_option("--output-dir", g.output_dir, "Directory for tables and metadata.json");
  app.add_option("--leader", g.leader, "Leading entity");
  app.add_option("--follower", g.follower, "Following entity");
  app.add_option("--seed", g.seed, "Override the seed of a synth spec");
  app.add_option("--config", g.config, "Plan (harvest) or generator spec (synth), JSON");
  app.add_option("--threads", g.threads, "Worker threads for TVD matrices")->check(CLI::Range(1u, 256u));

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write it in canonical form");
  std::string missing_policy = "fail";
  auto* harvest = app.add_subcommand("harvest", "Run a query plan and assemble a corpus");
  harvest->add_option("--missing-policy", missing_policy, "fail | zero")
      ->check(CLI::IsMember({"fail", "zero"}));
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus from a spec");

  FitOptions fit_options;
  auto* fit = app.add_subcommand("fit", "Fit a growth or lag trend");
  fit->add_option("--model", fit_options.model, "loglinear | hinge | lag")
      ->check(CLI::IsMember({"loglinear", "hinge", "lag"}));
  fit->add_option("--entity", fit_options.entity, "Entity to fit (volume models)");
  fit->add_option("--knot", fit_options.knot, "auto or a fractional year (hinge)");

  bool exclude_zero_threshold = false;
  auto* lag = app.add_subcommand("lag", "Keyword lag table and mean lag");
  lag->add_flag("--exclude-zero-threshold", exclude_zero_threshold,
                "Leave lags with a zero leader count out of the mean");
  auto* tvd = app.add_subcommand("tvd", "Year-by-year total variation distance matrices");
  auto* entropy = app.add_subcommand("entropy", "Keyword-portfolio entropy per year");

  ReportOptions report_options;
  int bar_year = 0;
  auto* report = app.add_subcommand("report", "Every table for a leader/follower pair");
  report->add_option("--series-threshold", report_options.series_share_threshold,
                     "Minimum share for the share time series")->check(CLI::Range(0.0, 1.0));
  report->add_option("--bar-threshold", report_options.bar_share_threshold,
                     "Minimum share for the share bar table")->check(CLI::Range(0.0, 1.0));
  auto* bar_year_opt = report->add_option("--bar-year", bar_year, "Year of the share bar table");
  report->add_flag("--exclude-zero-threshold", report_options.lag.exclude_zero_threshold,
                   "Leave lags with a zero leader count out of the mean");

  for (auto* sub : {ingest, harvest, synth, fit, lag, tvd, entropy, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*ingest) return cmd_ingest(g);
    if (*harvest) return cmd_harvest(g, missing_policy);
    if (*synth) return cmd_synth(g);
    if (*fit) return cmd_fit(g, fit_options);
    if (*lag) return cmd_lag(g, exclude_zero_threshold);
    if (*tvd) return cmd_tvd(g);
    if (*entropy) return cmd_entropy(g);
    if (*report) {
      if (*bar_year_opt) report_options.bar_year = bar_year;
      return cmd_report(g, report_options);
    }
  } catch (const ValidationError& e) {
    log_error(e.what());
    return kExitValidation;
  } catch (const ComputationError& e) {
    log_error(e.what());
    return kExitComputation;
  } catch (const IoError& e) {
    log_error(e.what());
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    log_error(e.what());
    return kExitIo;
  }
  return kExitValidation;
}
