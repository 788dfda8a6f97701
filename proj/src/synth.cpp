#include "pubtrend/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "pubtrend/error.hpp"
#include "pubtrend/random.hpp"

namespace pubtrend {
namespace {

constexpr double kMaxCount = 9007199254740992.0;  // 2^53

void validate(const GrowthSpec& spec) {
  if (spec.entities.empty()) throw ValidationError("growth spec has no entities");
  if (spec.noise.sigma < 0.0 || !std::isfinite(spec.noise.sigma)) {
    throw ValidationError("growth spec noise sigma must be finite and >= 0");
  }
  std::set<std::string> names;
  for (const auto& entity : spec.entities) {
    if (entity.entity.empty()) throw ValidationError("growth spec entity without a name");
    if (!names.insert(entity.entity).second) {
      throw ValidationError("growth spec repeats entity '" + entity.entity + "'");
    }
    if (entity.first_year > entity.last_year) {
      throw ValidationError("growth spec entity '" + entity.entity + "' has an empty year range");
    }
    if (entity.keywords.empty()) {
      throw ValidationError("growth spec entity '" + entity.entity + "' has no keywords");
    }
    for (const auto& kw : entity.keywords) {
      if (kw.hinge != 0.0 && !kw.knot) {
        throw ValidationError("keyword '" + kw.keyword + "' has a hinge but no knot");
      }
    }
  }
}

}  // namespace

Corpus generate_corpus(const GrowthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  CorpusBuilder builder;
  for (const auto& entity : spec.entities) {
    const EntityId id{entity.entity};
    builder.add_years(id, entity.first_year, entity.last_year);
    for (const auto& kw : entity.keywords) {
      for (int year = entity.first_year; year <= entity.last_year; ++year) {
        double log_mean = kw.base + kw.slope * (year - spec.reference_year);
        if (kw.knot) log_mean += kw.hinge * std::max(year - *kw.knot, 0.0);
        const double mean = std::exp(log_mean);
        double value = mean;
        switch (spec.noise.kind) {
          case NoiseKind::kNone: break;
          case NoiseKind::kLogNormal: value = mean * std::exp(spec.noise.sigma * rng.normal()); break;
          case NoiseKind::kPoisson:
            if (!(mean < kMaxCount)) break;  // reported as overflow below
            value = static_cast<double>(rng.poisson(mean));
            break;
        }
        if (!std::isfinite(value) || value >= kMaxCount) {
          throw ValidationError("synthetic count overflow for '" + kw.keyword + "' of '" +
                                entity.entity + "' in " + std::to_string(year));
        }
        builder.add(id, year, kw.keyword, static_cast<Count>(std::round(value)));
      }
    }
  }
  return builder.build();
}

GrowthSpec expand_regimes(const HeterogeneousSpec& spec) {
  GrowthSpec out;
  out.reference_year = spec.reference_year;
  out.noise = spec.noise;
  out.seed = spec.seed;
  for (const auto& range : spec.ranges) {
    out.entities.push_back({range.entity, range.first_year, range.last_year, {}});
  }
  for (const auto& regime : spec.regimes) {
    if (regime.keyword_count < 1) {
      throw ValidationError("regime '" + regime.name + "' needs at least one keyword");
    }
    for (const auto& params : regime.entities) {
      auto it = std::find_if(out.entities.begin(), out.entities.end(),
                             [&](const EntityGrowth& e) { return e.entity == params.entity; });
      if (it == out.entities.end()) {
        throw ValidationError("regime '" + regime.name + "' names unknown entity '" +
                              params.entity + "'");
      }
      for (int i = 0; i < regime.keyword_count; ++i) {
        it->keywords.push_back({regime.name + " " + std::to_string(i),
                                params.base + regime.base_step * i, params.slope, params.hinge,
                                params.knot});
      }
    }
  }
  return out;
}

Corpus generate_heterogeneous(const HeterogeneousSpec& spec) {
  if (spec.regimes.size() < 2) {
    throw ValidationError("heterogeneous generation needs at least two growth regimes");
  }
  return generate_corpus(expand_regimes(spec));
}

//
// JSON
//

namespace {

using nlohmann::json;

NoiseModel noise_from_json(const json& j) {
  NoiseModel noise;
  if (j.is_null()) return noise;
  const auto kind = j.value("kind", std::string("none"));
  if (kind == "none") {
    noise.kind = NoiseKind::kNone;
  } else if (kind == "lognormal") {
    noise.kind = NoiseKind::kLogNormal;
  } else if (kind == "poisson") {
    noise.kind = NoiseKind::kPoisson;
  } else {
    throw ValidationError("unknown noise kind '" + kind + "'");
  }
  noise.sigma = j.value("sigma", 0.0);
  return noise;
}

json noise_to_json(const NoiseModel& noise) {
  switch (noise.kind) {
    case NoiseKind::kNone: return {{"kind", "none"}};
    case NoiseKind::kLogNormal: return {{"kind", "lognormal"}, {"sigma", noise.sigma}};
    case NoiseKind::kPoisson: return {{"kind", "poisson"}};
  }
  return {};
}

std::optional<double> optional_knot(const json& j) {
  if (j.contains("knot") && !j.at("knot").is_null()) return j.at("knot").get<double>();
  return std::nullopt;
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed growth spec: ") + e.what());
  }
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid growth spec: ") + e.what());
  }
}

}  // namespace

bool is_heterogeneous_spec(std::string_view json_text) {
  const auto doc = parse_document(json_text);
  return doc.is_object() && doc.contains("regimes");
}

GrowthSpec parse_growth_spec(std::string_view json_text) {
  const auto doc = parse_document(json_text);
  return guarded([&] {
    GrowthSpec spec;
    spec.reference_year = doc.value("reference_year", 0.0);
    spec.seed = doc.value("seed", std::uint64_t{0});
    spec.noise = noise_from_json(doc.value("noise", json()));
    for (const auto& e : doc.at("entities")) {
      EntityGrowth entity{e.at("entity").get<std::string>(), e.at("first_year").get<int>(),
                          e.at("last_year").get<int>(), {}};
      for (const auto& k : e.at("keywords")) {
        entity.keywords.push_back({k.at("keyword").get<std::string>(), k.value("base", 0.0),
                                   k.value("slope", 0.0), k.value("hinge", 0.0), optional_knot(k)});
      }
      spec.entities.push_back(std::move(entity));
    }
    return spec;
  });
}

HeterogeneousSpec parse_heterogeneous_spec(std::string_view json_text) {
  const auto doc = parse_document(json_text);
  return guarded([&] {
    HeterogeneousSpec spec;
    spec.reference_year = doc.value("reference_year", 0.0);
    spec.seed = doc.value("seed", std::uint64_t{0});
    spec.noise = noise_from_json(doc.value("noise", json()));
    for (const auto& r : doc.at("ranges")) {
      spec.ranges.push_back({r.at("entity").get<std::string>(), r.at("first_year").get<int>(),
                             r.at("last_year").get<int>()});
    }
    for (const auto& g : doc.at("regimes")) {
      GrowthRegime regime;
      regime.name = g.at("name").get<std::string>();
      regime.keyword_count = g.value("keyword_count", 1);
      regime.base_step = g.value("base_step", 0.0);
      for (const auto& p : g.at("entities")) {
        regime.entities.push_back({p.at("entity").get<std::string>(), p.value("base", 0.0),
                                   p.value("slope", 0.0), p.value("hinge", 0.0), optional_knot(p)});
      }
      spec.regimes.push_back(std::move(regime));
    }
    return spec;
  });
}

std::string to_json_text(const GrowthSpec& spec) {
  json doc;
  doc["reference_year"] = spec.reference_year;
  doc["seed"] = spec.seed;
  doc["noise"] = noise_to_json(spec.noise);
  doc["rng"] = Rng::kAlgorithm;
  doc["entities"] = json::array();
  for (const auto& e : spec.entities) {
    json entity{{"entity", e.entity}, {"first_year", e.first_year}, {"last_year", e.last_year},
                {"keywords", json::array()}};
    for (const auto& k : e.keywords) {
      json kw{{"keyword", k.keyword}, {"base", k.base}, {"slope", k.slope}, {"hinge", k.hinge}};
      if (k.knot) kw["knot"] = *k.knot;
      entity["keywords"].push_back(std::move(kw));
    }
    doc["entities"].push_back(std::move(entity));
  }
  return doc.dump(2);
}

std::string to_json_text(const HeterogeneousSpec& spec) {
  json doc;
  doc["reference_year"] = spec.reference_year;
  doc["seed"] = spec.seed;
  doc["noise"] = noise_to_json(spec.noise);
  doc["rng"] = Rng::kAlgorithm;
  doc["ranges"] = json::array();
  for (const auto& r : spec.ranges) {
    doc["ranges"].push_back({{"entity", r.entity}, {"first_year", r.first_year},
                             {"last_year", r.last_year}});
  }
  doc["regimes"] = json::array();
  for (const auto& g : spec.regimes) {
    json regime{{"name", g.name}, {"keyword_count", g.keyword_count},
                {"base_step", g.base_step}, {"entities", json::array()}};
    for (const auto& p : g.entities) {
      json params{{"entity", p.entity}, {"base", p.base}, {"slope", p.slope}, {"hinge", p.hinge}};
      if (p.knot) params["knot"] = *p.knot;
      regime["entities"].push_back(std::move(params));
    }
    doc["regimes"].push_back(std::move(regime));
  }
  return doc.dump(2);
}

}  // namespace pubtrend
