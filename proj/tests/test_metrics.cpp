#include <doctest.h>

#include <cmath>
#include <random>

#include "pubtrend/error.hpp"
#include "pubtrend/metrics.hpp"
#include "support.hpp"

using namespace pubtrend;
using testing::kCN;
using testing::kUS;

namespace {

// Straight from the definition: scan the follower's whole range in order.
std::optional<int> brute_force_lag(const Corpus& c, const EntityId& leader,
                                   const EntityId& follower, std::size_t k, int year) {
  const Count threshold = c.count(leader, year, k);
  const auto range = c.years(follower);
  for (int y = range.first; y <= range.last; ++y) {
    if (c.count(follower, y, k) >= threshold) return y - year;
  }
  return std::nullopt;
}

double naive_tvd(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  long double sum = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) sum += std::fabs((long double)p(i) - q(i));
  return static_cast<double>(sum / 2);
}

Corpus uniform_corpus(int keywords, int first, int last, Count per_cell) {
  CorpusBuilder b;
  for (int y = first; y <= last; ++y) {
    for (int k = 0; k < keywords; ++k) b.add(kUS, y, "k" + std::to_string(k), per_cell);
  }
  return b.build();
}

}  // namespace

TEST_CASE("tvd hand case") {
  Eigen::Vector3d p(0.5, 0.5, 0.0), q(0.25, 0.25, 0.5);
  CHECK(std::fabs(total_variation(p, q) - 0.5) < 1e-12);
  CHECK(total_variation(p, p) == 0.0);
  Eigen::Vector2d a(1, 0), b(0, 1);
  CHECK(total_variation(a, b) == 1.0);
}

TEST_CASE("tvd is a metric on random distributions") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 70);
    const auto p = testing::random_distribution(rng, k);
    const auto q = testing::random_distribution(rng, k);
    const auto r = testing::random_distribution(rng, k);
    const double pq = total_variation(p, q), qp = total_variation(q, p);
    const double pr = total_variation(p, r), qr = total_variation(q, r);
    REQUIRE(pq == qp);
    REQUIRE(total_variation(p, p) == 0.0);
    REQUIRE(pq >= 0.0);
    REQUIRE(pq <= 1.0 + 1e-12);
    REQUIRE(pr <= pq + qr + 1e-12);
    REQUIRE(std::fabs(pq - naive_tvd(p, q)) < 1e-13);
  }
}

TEST_CASE("entropy bounds and special values") {
  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(64, 1.0 / 64);
  CHECK(std::fabs(shannon_entropy(uniform) - std::log(64.0)) < 1e-9);
  Eigen::VectorXd point = Eigen::VectorXd::Zero(64);
  point(17) = 1.0;
  CHECK(shannon_entropy(point) == 0.0);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 80);
    const auto p = testing::random_distribution(rng, k);
    const double s = shannon_entropy(p);
    REQUIRE(s >= 0.0);
    REQUIRE(s <= std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("entropy is invariant under keyword permutation") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = testing::random_distribution(rng, 1 + static_cast<int>(rng() % 40));
    const double before = shannon_entropy(p);
    std::shuffle(p.data(), p.data() + p.size(), rng);
    REQUIRE(std::fabs(shannon_entropy(p) - before) < 1e-12);
  }
}

TEST_CASE("keyword shares and entropy series on a uniform corpus") {
  const auto c = uniform_corpus(8, 2000, 2003, 5);
  const auto s = keyword_shares(c, kUS, 2001);
  CHECK(s.sample_size == 40);
  CHECK(s.shares.sum() == doctest::Approx(1.0));
  const auto series = entropy_series(c, kUS);
  REQUIRE(series.points.size() == 4);
  for (const auto& p : series.points) CHECK(std::fabs(p.entropy - std::log(8.0)) < 1e-12);
  CHECK_THROWS_AS(keyword_shares(c, kUS, 1999), ValidationError);
}

TEST_CASE("zero-volume years have no shares") {
  CorpusBuilder b;
  b.add(kUS, 2000, "a", 1);
  b.add(kUS, 2001, "a", 0);
  b.add(kUS, 2002, "a", 2);
  const auto c = b.build();
  CHECK_THROWS_AS(keyword_shares(c, kUS, 2001), ComputationError);
  const auto series = entropy_series(c, kUS);
  REQUIRE(series.points.size() == 2);
  CHECK(series.points[1].year == 2002);
  const auto m = tvd_matrix(c, kUS, kUS);
  CHECK_FALSE(m.defined(1, 1));
  CHECK(std::isnan(m.values(1, 0)));
  CHECK(m.defined(0, 2));
  CHECK(m.values(0, 2) == 0.0);
}

TEST_CASE("tvd matrix equals cell-wise tvd, for any thread count") {
  std::mt19937_64 rng(3);
  const auto c = testing::random_pair_corpus(rng, 12, 1990, 2010, 1995, 2012);
  const auto m = tvd_matrix(c, kUS, kCN);
  REQUIRE(m.values.rows() == 21);
  REQUIRE(m.values.cols() == 18);
  for (int i = 0; i < 21; ++i) {
    for (int j = 0; j < 18; ++j) {
      const auto p = keyword_shares(c, kUS, 1990 + i);
      const auto q = keyword_shares(c, kCN, 1995 + j);
      REQUIRE(m.values(i, j) == tvd(p, q));
    }
  }
  for (unsigned threads : {2u, 3u, 8u, 64u}) {
    const auto mt = tvd_matrix(c, kUS, kCN, threads);
    REQUIRE(mt.values == m.values);
  }
  const auto self = tvd_matrix(c, kUS, kUS);
  CHECK(self.values.diagonal().isZero(0.0));
  CHECK(self.values == self.values.transpose());
}

TEST_CASE("one-year corpus gives a 1x1 matrix") {
  CorpusBuilder b;
  b.add(kUS, 2000, "a", 1);
  b.add(kCN, 2000, "a", 1);
  const auto m = tvd_matrix(b.build(), kUS, kCN);
  CHECK(m.values.rows() == 1);
  CHECK(m.values.cols() == 1);
  CHECK(m.values(0, 0) == 0.0);
}

TEST_CASE("lag fixture: neural network 1987") {
  const auto c = load_corpus(PUBTREND_TEST_DATA "/neural_network.csv");
  const auto v = lag(c, kUS, kCN, "neural network", 1987);
  REQUIRE(v.defined());
  CHECK(*v.lag == 6);
  CHECK_FALSE(v.zero_threshold);
}

TEST_CASE("lag edge cases") {
  CorpusBuilder b;
  b.add_years(kUS, 2000, 2004);
  b.add_years(kCN, 1998, 2003);
  for (int y = 2000; y <= 2004; ++y) b.add(kUS, y, "a", 10 * (y - 1999));
  for (int y = 1998; y <= 2003; ++y) b.add(kCN, y, "a", y == 1998 ? 15 : 5 * (y - 1997));
  b.add(kUS, 2002, "b", 0);
  const auto c = b.build();
  // Follower was already ahead in 1998: negative lag.
  CHECK(*lag(c, kUS, kCN, "a", 2000).lag == -2);
  // 20 first reached in 2001 (5*4).
  CHECK(*lag(c, kUS, kCN, "a", 2001).lag == 0);
  // Leader 50 in 2004 never reached before the follower's data ends.
  CHECK_FALSE(lag(c, kUS, kCN, "a", 2004).defined());
  // Zero leader count: window minimum, flagged.
  const auto z = lag(c, kUS, kCN, "b", 2002);
  CHECK(*z.lag == 1998 - 2002);
  CHECK(z.zero_threshold);
  CHECK_THROWS_AS(lag(c, kUS, kCN, "a", 1999), ValidationError);
  CHECK_THROWS_AS(lag(c, kUS, kCN, "missing", 2000), ValidationError);
}

TEST_CASE("lag table matches a brute-force oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int l0 = 1980 + static_cast<int>(rng() % 10);
    const int f0 = 1980 + static_cast<int>(rng() % 10);
    const auto c = testing::random_pair_corpus(rng, 5, l0, l0 + 15, f0, f0 + 12, 30);
    const auto table = lag_table(c, kUS, kCN);
    REQUIRE(table.rows.size() == 5 * 16);
    for (const auto& row : table.rows) {
      const auto expected = brute_force_lag(c, kUS, kCN, row.keyword, row.year);
      REQUIRE(row.value.lag == expected);
    }
    // Mean over defined lags, m(y) counts them.
    for (const auto& point : table.mean) {
      double sum = 0;
      int m = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        if (auto d = brute_force_lag(c, kUS, kCN, k, point.year)) {
          sum += *d;
          ++m;
        }
      }
      REQUIRE(m == point.keywords_defined);
      REQUIRE(point.mean_lag == doctest::Approx(sum / m).epsilon(1e-14));
    }
  }
}

TEST_CASE("lag is non-increasing when the follower grows") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = testing::random_pair_corpus(rng, 3, 1990, 2000, 1988, 2004, 20);
    // Add one to every follower cell.
    auto tables = c.tables();
    for (auto& t : tables) {
      if (t.entity == kCN) t.counts.array() += 1;
    }
    const Corpus grown(c.keywords(), tables);
    for (std::size_t k = 0; k < 3; ++k) {
      for (int y = 1990; y <= 2000; ++y) {
        const auto before = lag(c, kUS, kCN, c.keywords()[k], y);
        const auto after = lag(grown, kUS, kCN, c.keywords()[k], y);
        if (before.defined()) {
          REQUIRE(after.defined());
          REQUIRE(*after.lag <= *before.lag);
        }
      }
    }
  }
}

TEST_CASE("an all-zero keyword adds window-minimum lags to every year") {
  std::mt19937_64 rng(8);
  const auto c = testing::random_pair_corpus(rng, 4, 1990, 2000, 1985, 2005, 20);
  auto tables = c.tables();
  auto keywords = c.keywords();
  keywords.push_back("zzz");
  for (auto& t : tables) {
    CountMatrix wider = CountMatrix::Zero(t.counts.rows(), t.counts.cols() + 1);
    wider.leftCols(t.counts.cols()) = t.counts;
    t.counts = wider;
  }
  const Corpus padded(keywords, tables);
  const auto base = mean_lag(c, kUS, kCN);
  const auto with_zero = mean_lag(padded, kUS, kCN);
  const auto excluded = mean_lag(padded, kUS, kCN, LagOptions{true});
  REQUIRE(with_zero.size() == 11);
  for (std::size_t i = 0; i < with_zero.size(); ++i) {
    const auto& p = with_zero[i];
    const int window_min = 1985 - p.year;
    const auto it = std::find_if(base.begin(), base.end(),
                                 [&](const MeanLagPoint& b) { return b.year == p.year; });
    if (it == base.end()) {
      CHECK(p.keywords_defined == 1);
      CHECK(p.mean_lag == window_min);
      continue;
    }
    CHECK(p.keywords_defined == it->keywords_defined + 1);
    CHECK(p.mean_lag == doctest::Approx((it->mean_lag * it->keywords_defined + window_min) /
                                        (it->keywords_defined + 1)));
  }
  // Excluding zero-threshold lags restores the original mean when no real
  // keyword had a zero leader count.
  bool any_zero = false;
  for (const auto& t : c.tables()) {
    if (t.entity == kUS) any_zero = (t.counts.array() == 0).any();
  }
  if (!any_zero) {
    REQUIRE(excluded.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(excluded[i].mean_lag == base[i].mean_lag);
  }
}

TEST_CASE("tvd rejects mismatched keyword lists") {
  CorpusBuilder a, b;
  a.add(kUS, 2000, "x", 1);
  b.add(kUS, 2000, "y", 1);
  const auto ca = a.build(), cb = b.build();
  CHECK_THROWS_AS(tvd(keyword_shares(ca, kUS, 2000), keyword_shares(cb, kUS, 2000)),
                  ValidationError);
}

TEST_CASE("share and entropy hand cases") {
  CorpusBuilder b;
  b.add_keyword("c");
  b.add(kUS, 2000, "a", 3);
  b.add(kUS, 2000, "b", 1);
  b.add(kUS, 2001, "b", 8);
  b.add(kUS, 2002, "a", 5);
  b.add(kUS, 2002, "b", 5);
  b.add(kUS, 2003, "a", 4);
  b.add(kUS, 2003, "b", 4);
  b.add(kUS, 2003, "c", 4);
  const auto c = b.build();
  const auto s = keyword_shares(c, kUS, 2000);
  CHECK(s.shares(0) == 0.75);
  CHECK(s.shares(1) == 0.25);
  CHECK(s.shares(2) == 0.0);
  const auto single = keyword_shares(c, kUS, 2001);
  CHECK(single.shares(1) == 1.0);
  CHECK(single.shares.sum() == 1.0);

  const auto series = entropy_series(c, kUS);
  CHECK(series.points[1].entropy == 0.0);
  CHECK(std::fabs(series.points[2].entropy - std::log(2.0)) < 1e-15);
  CHECK(std::fabs(series.points[3].entropy - std::log(3.0)) < 1e-15);
  for (const auto& p : series.points) {
    CHECK(p.entropy == entropy(keyword_shares(c, kUS, p.year)));
  }
}

TEST_CASE("constant shares give a constant entropy series") {
  CorpusBuilder b;
  for (int y = 2000; y <= 2005; ++y) {
    const Count scale = y - 1999;
    b.add(kUS, y, "a", 1 * scale);
    b.add(kUS, y, "b", 3 * scale);
    b.add(kUS, y, "c", 6 * scale);
  }
  const auto series = entropy_series(b.build(), kUS);
  for (const auto& p : series.points) CHECK(p.entropy == series.points[0].entropy);
}

TEST_CASE("mean lag hand cases") {
  // Leader year 2000 counts: a=5, b=7, c=100. Follower reaches 5 in 2002,
  // 7 in 2004 and never reaches 100.
  CorpusBuilder b;
  b.add_years(kUS, 2000, 2001);
  b.add_years(kCN, 2000, 2005);
  b.add(kUS, 2000, "a", 5);
  b.add(kUS, 2000, "b", 7);
  b.add(kUS, 2000, "c", 100);
  b.add(kUS, 2001, "c", 1000);
  b.add(kUS, 2001, "a", 1000);
  b.add(kUS, 2001, "b", 6);
  for (int y = 2000; y <= 2005; ++y) {
    b.add(kCN, y, "a", 2 * (y - 2000) + 1);
    b.add(kCN, y, "b", 2 * (y - 2000));
    b.add(kCN, y, "c", 1);
  }
  const auto points = mean_lag(b.build(), kUS, kCN);
  REQUIRE(points.size() == 2);
  CHECK(points[0].year == 2000);
  CHECK(points[0].mean_lag == 3.0);
  CHECK(points[0].keywords_defined == 2);
  // 2001: only b (6, reached in 2003) is defined.
  CHECK(points[1].mean_lag == 2.0);
  CHECK(points[1].keywords_defined == 1);

  CorpusBuilder none;
  none.add(kUS, 2000, "a", 10);
  none.add(kCN, 2000, "a", 1);
  CHECK(mean_lag(none.build(), kUS, kCN).empty());
}

TEST_CASE("lag with a zero leader count at a zero follower window start") {
  CorpusBuilder b;
  b.add(kUS, 2000, "a", 0);
  b.add_years(kCN, 1995, 2005);
  b.add(kCN, 2003, "a", 4);
  const auto v = lag(b.build(), kUS, kCN, "a", 2000);
  CHECK(*v.lag == -5);
  CHECK(v.zero_threshold);
}
