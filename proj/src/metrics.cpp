#include "pubtrend/metrics.hpp"

#include <algorithm>
#include <limits>
#include <thread>

#include "pubtrend/error.hpp"

namespace pubtrend {

ShareDistribution keyword_shares(const Corpus& corpus, const EntityId& entity, int year) {
  const auto& table = corpus.table(entity);
  if (!table.years.contains(year)) {
    throw ValidationError("year " + std::to_string(year) + " outside range of entity '" +
                          entity.name + "'");
  }
  const auto counts = table.counts.row(table.row(year));
  const Count total = counts.sum();
  if (total <= 0) {
    throw ComputationError("share distribution undefined: zero volume for '" + entity.name +
                           "' in " + std::to_string(year));
  }
  return ShareDistribution{entity, year, normalize_counts(counts.transpose()), total,
                           corpus.keyword_list()};
}

double tvd(const ShareDistribution& p, const ShareDistribution& q) {
  const bool same_list =
      p.keywords == q.keywords || (p.keywords && q.keywords && *p.keywords == *q.keywords);
  if (!same_list || p.shares.size() != q.shares.size()) {
    throw ValidationError("tvd: distributions are over different keyword lists");
  }
  return total_variation(p.shares, q.shares);
}

double entropy(const ShareDistribution& p) { return shannon_entropy(p.shares); }

namespace {

// Per-year share matrix (rows = years) plus a row mask for zero-volume years.
struct ShareRows {
  Eigen::MatrixXd shares;
  std::vector<bool> defined;
};

ShareRows share_rows(const EntityTable& table) {
  ShareRows out{Eigen::MatrixXd::Zero(table.counts.rows(), table.counts.cols()),
                std::vector<bool>(static_cast<std::size_t>(table.counts.rows()), false)};
  for (Eigen::Index r = 0; r < table.counts.rows(); ++r) {
    const Count total = table.counts.row(r).sum();
    if (total > 0) {
      out.shares.row(r) = normalize_counts(table.counts.row(r).transpose()).transpose();
      out.defined[static_cast<std::size_t>(r)] = true;
    }
  }
  return out;
}

std::vector<int> year_list(const YearRange& range) {
  std::vector<int> years;
  for (int y = range.first; y <= range.last; ++y) years.push_back(y);
  return years;
}

}  // namespace

DistanceMatrix tvd_matrix(const Corpus& corpus, const EntityId& entity_row,
                          const EntityId& entity_col, unsigned threads) {
  const auto& row_table = corpus.table(entity_row);
  const auto& col_table = corpus.table(entity_col);
  const ShareRows row_shares = share_rows(row_table);
  const ShareRows col_shares = share_rows(col_table);

  DistanceMatrix out{entity_row, entity_col, year_list(row_table.years),
                     year_list(col_table.years), {}, {}};
  const Eigen::Index n_rows = row_table.counts.rows();
  const Eigen::Index n_cols = col_table.counts.rows();
  out.values.setConstant(n_rows, n_cols, std::numeric_limits<double>::quiet_NaN());
  out.defined.setConstant(n_rows, n_cols, false);

  auto fill_rows = [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index i = begin; i < end; ++i) {
      if (!row_shares.defined[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n_cols; ++j) {
        if (!col_shares.defined[static_cast<std::size_t>(j)]) continue;
        out.values(i, j) = total_variation(row_shares.shares.row(i), col_shares.shares.row(j));
        out.defined(i, j) = true;
      }
    }
  };

  const auto workers = static_cast<Eigen::Index>(std::max(1u, threads));
  if (workers == 1 || n_rows < 2) {
    fill_rows(0, n_rows);
  } else {
    std::vector<std::jthread> pool;
    const Eigen::Index chunk = (n_rows + workers - 1) / workers;
    for (Eigen::Index begin = 0; begin < n_rows; begin += chunk) {
      pool.emplace_back(fill_rows, begin, std::min(n_rows, begin + chunk));
    }
  }
  return out;
}

EntropySeries entropy_series(const Corpus& corpus, const EntityId& entity) {
  const auto& table = corpus.table(entity);
  EntropySeries out{entity, {}};
  for (int year = table.years.first; year <= table.years.last; ++year) {
    const auto counts = table.counts.row(table.row(year));
    const Count total = counts.sum();
    if (total <= 0) continue;
    out.points.push_back({year, shannon_entropy(normalize_counts(counts.transpose())), total});
  }
  return out;
}

namespace {

LagValue keyword_lag(const EntityTable& leader, const EntityTable& follower,
                     Eigen::Index keyword, int year) {
  const Count threshold = leader.counts(leader.row(year), keyword);
  LagValue out;
  out.zero_threshold = threshold == 0;
  for (int t = follower.years.first; t <= follower.years.last; ++t) {
    if (follower.counts(follower.row(t), keyword) >= threshold) {
      out.lag = t - year;
      break;
    }
  }
  return out;
}

}  // namespace

LagValue lag(const Corpus& corpus, const EntityId& leader, const EntityId& follower,
             std::string_view keyword, int year) {
  const auto& lead = corpus.table(leader);
  const auto& follow = corpus.table(follower);
  const auto k = static_cast<Eigen::Index>(corpus.keyword_index(keyword));
  if (!lead.years.contains(year)) {
    throw ValidationError("lag: year " + std::to_string(year) + " outside range of leader '" +
                          leader.name + "'");
  }
  return keyword_lag(lead, follow, k, year);
}

namespace {

std::vector<MeanLagPoint> average_rows(const std::vector<LagRow>& rows, const YearRange& years,
                                       const LagOptions& options) {
  const auto n_years = static_cast<std::size_t>(years.size());
  std::vector<double> sums(n_years, 0.0);
  std::vector<int> defined(n_years, 0);
  // Rows are keyword-major, so each year's sum accumulates in keyword order.
  for (const auto& row : rows) {
    if (!row.value.defined()) continue;
    if (options.exclude_zero_threshold && row.value.zero_threshold) continue;
    const auto i = static_cast<std::size_t>(row.year - years.first);
    sums[i] += *row.value.lag;
    ++defined[i];
  }
  std::vector<MeanLagPoint> out;
  for (std::size_t i = 0; i < n_years; ++i) {
    if (defined[i] == 0) continue;
    out.push_back({years.first + static_cast<int>(i), sums[i] / defined[i], defined[i]});
  }
  return out;
}

}  // namespace

LagTable lag_table(const Corpus& corpus, const EntityId& leader, const EntityId& follower,
                   const LagOptions& options) {
  const auto& lead = corpus.table(leader);
  const auto& follow = corpus.table(follower);
  LagTable out{leader, follower, corpus.keyword_list(), {}, {}};
  const auto k = static_cast<Eigen::Index>(corpus.keyword_count());
  out.rows.reserve(static_cast<std::size_t>(k * lead.years.size()));
  for (Eigen::Index c = 0; c < k; ++c) {
    for (int year = lead.years.first; year <= lead.years.last; ++year) {
      out.rows.push_back({static_cast<std::size_t>(c), year, keyword_lag(lead, follow, c, year)});
    }
  }
  out.mean = average_rows(out.rows, lead.years, options);
  return out;
}

std::vector<MeanLagPoint> mean_lag(const Corpus& corpus, const EntityId& leader,
                                   const EntityId& follower, const LagOptions& options) {
  return lag_table(corpus, leader, follower, options).mean;
}

}  // namespace pubtrend
