#pragma once

// Shared fixtures and generators for the test binaries.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pubtrend/corpus.hpp"
#include "pubtrend/log.hpp"

namespace testing {

using pubtrend::Corpus;
using pubtrend::CorpusBuilder;
using pubtrend::Count;
using pubtrend::EntityId;

inline const EntityId kUS{"US"};
inline const EntityId kCN{"CN"};

// Random probability vector of length k. Some entries are forced to zero so
// the sparse corners get exercised.
inline Eigen::VectorXd random_distribution(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd p(k);
  for (int i = 0; i < k; ++i) p(i) = u(rng) < 0.2 ? 0.0 : -std::log(1.0 - u(rng));
  if (p.sum() == 0.0) p(0) = 1.0;
  return p / p.sum();
}

// Leader/follower corpus with independent random counts, years
// [l0, l1] and [f0, f1].
inline Corpus random_pair_corpus(std::mt19937_64& rng, int keywords, int l0, int l1, int f0,
                                 int f1, Count max_count = 50) {
  std::uniform_int_distribution<Count> count(0, max_count);
  CorpusBuilder b;
  for (int k = 0; k < keywords; ++k) b.add_keyword("kw" + std::to_string(k));
  b.add_years(kUS, l0, l1);
  b.add_years(kCN, f0, f1);
  for (int k = 0; k < keywords; ++k) {
    for (int y = l0; y <= l1; ++y) b.add(kUS, y, "kw" + std::to_string(k), count(rng));
    for (int y = f0; y <= f1; ++y) b.add(kCN, y, "kw" + std::to_string(k), count(rng));
  }
  return b.build();
}

// Silences library logging for the lifetime of the guard; captures messages.
class LogCapture {
 public:
  LogCapture()
      : previous_(pubtrend::set_log_sink(
            [this](pubtrend::LogLevel, std::string_view m) { messages.emplace_back(m); })) {}
  ~LogCapture() { pubtrend::set_log_sink(previous_); }

  bool contains(std::string_view needle) const {
    for (const auto& m : messages) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }

  std::vector<std::string> messages;

 private:
  pubtrend::LogSink previous_;
};

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pubtrend-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
