#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pubtrend/corpus.hpp"

namespace pubtrend {

enum class NoiseKind { kNone, kLogNormal, kPoisson };

struct NoiseModel {
  NoiseKind kind = NoiseKind::kNone;
  double sigma = 0.0;  // log-normal only
};

// Expected count exp(base + slope * (y - ref) + hinge * (y - knot)_+).
struct KeywordGrowth {
  std::string keyword;
  double base = 0.0;
  double slope = 0.0;
  double hinge = 0.0;
  std::optional<double> knot;  // calendar year; required when hinge != 0
};

struct EntityGrowth {
  std::string entity;
  int first_year = 0;
  int last_year = 0;
  std::vector<KeywordGrowth> keywords;
};

struct GrowthSpec {
  std::vector<EntityGrowth> entities;
  double reference_year = 0.0;
  NoiseModel noise;
  std::uint64_t seed = 0;
};

// Counts are round-half-away-from-zero of the (noisy) expected value. Draws
// happen entity by entity, keyword by keyword, year by year from one seeded
// stream, so the seed fixes the corpus. Throws ValidationError for invalid
// specs or counts beyond 2^53.
Corpus generate_corpus(const GrowthSpec& spec);

// A block of `keyword_count` keywords named "<name> <i>" sharing per-entity
// growth parameters. Keyword i's base is offset by i * base_step so their
// level crossings are spread across the year.
struct GrowthRegime {
  struct Params {
    std::string entity;
    double base = 0.0;
    double slope = 0.0;
    double hinge = 0.0;
    std::optional<double> knot;
  };

  std::string name;
  int keyword_count = 1;
  double base_step = 0.0;
  std::vector<Params> entities;
};

struct HeterogeneousSpec {
  struct Range {
    std::string entity;
    int first_year = 0;
    int last_year = 0;
  };

  std::vector<Range> ranges;
  double reference_year = 0.0;
  NoiseModel noise;
  std::uint64_t seed = 0;
  std::vector<GrowthRegime> regimes;
};

GrowthSpec expand_regimes(const HeterogeneousSpec& spec);

// Requires at least two regimes.
Corpus generate_heterogeneous(const HeterogeneousSpec& spec);

// Structured-text (JSON) forms. A document with a "regimes" key is a
// HeterogeneousSpec; otherwise a GrowthSpec.
GrowthSpec parse_growth_spec(std::string_view json_text);
HeterogeneousSpec parse_heterogeneous_spec(std::string_view json_text);
bool is_heterogeneous_spec(std::string_view json_text);
std::string to_json_text(const GrowthSpec& spec);
std::string to_json_text(const HeterogeneousSpec& spec);

}  // namespace pubtrend
