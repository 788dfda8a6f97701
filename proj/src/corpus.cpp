#include "pubtrend/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>

#include "pubtrend/csv.hpp"
#include "pubtrend/digest.hpp"
#include "pubtrend/error.hpp"

namespace pubtrend {

std::string canonical_keyword(std::string_view keyword) {
  return csv::to_lower(csv::trim(keyword));
}

Corpus::Corpus(std::vector<std::string> keywords, std::vector<EntityTable> tables) {
  if (keywords.empty()) throw ValidationError("corpus has no keywords");
  if (tables.empty()) throw ValidationError("corpus has no entities");

  const auto k = static_cast<Eigen::Index>(keywords.size());
  for (auto& keyword : keywords) {
    keyword = canonical_keyword(keyword);
    if (keyword.empty()) throw ValidationError("empty keyword");
  }
  std::vector<std::size_t> order(keywords.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return keywords[a] < keywords[b]; });
  std::vector<std::string> sorted;
  sorted.reserve(keywords.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted.push_back(keywords[order[i]]);
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      throw ValidationError("duplicate keyword '" + sorted[i] + "'");
    }
  }

  std::sort(tables.begin(), tables.end(),
            [](const EntityTable& a, const EntityTable& b) { return a.entity < b.entity; });
  for (std::size_t t = 0; t < tables.size(); ++t) {
    auto& table = tables[t];
    if (table.entity.name.empty()) throw ValidationError("empty entity name");
    if (t > 0 && tables[t - 1].entity == table.entity) {
      throw ValidationError("duplicate entity '" + table.entity.name + "'");
    }
    if (table.years.size() <= 0) {
      throw ValidationError("entity '" + table.entity.name + "' has an empty year range");
    }
    if (table.counts.rows() != table.years.size() || table.counts.cols() != k) {
      throw ValidationError("count table shape mismatch for entity '" + table.entity.name + "'");
    }
    if ((table.counts.array() < 0).any()) {
      throw ValidationError("negative count for entity '" + table.entity.name + "'");
    }
    CountMatrix permuted(table.counts.rows(), k);
    for (Eigen::Index c = 0; c < k; ++c) {
      permuted.col(c) = table.counts.col(static_cast<Eigen::Index>(order[c]));
    }
    table.counts = std::move(permuted);
  }

  for (std::size_t i = 0; i < sorted.size(); ++i) keyword_lookup_.emplace(sorted[i], i);
  keywords_ = std::make_shared<const std::vector<std::string>>(std::move(sorted));
  tables_ = std::move(tables);
}

std::optional<std::size_t> Corpus::find_keyword(std::string_view keyword) const {
  const auto it = keyword_lookup_.find(canonical_keyword(keyword));
  if (it == keyword_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::keyword_index(std::string_view keyword) const {
  if (auto index = find_keyword(keyword)) return *index;
  throw ValidationError("unknown keyword '" + std::string(keyword) + "'");
}

std::vector<EntityId> Corpus::entities() const {
  std::vector<EntityId> out;
  out.reserve(tables_.size());
  for (const auto& table : tables_) out.push_back(table.entity);
  return out;
}

bool Corpus::has_entity(const EntityId& entity) const {
  return std::any_of(tables_.begin(), tables_.end(),
                     [&](const EntityTable& t) { return t.entity == entity; });
}

const EntityTable& Corpus::table(const EntityId& entity) const {
  for (const auto& table : tables_) {
    if (table.entity == entity) return table;
  }
  throw ValidationError("unknown entity '" + entity.name + "'");
}

Count Corpus::count(const EntityId& entity, int year, std::size_t keyword) const {
  const auto& t = table(entity);
  if (!t.years.contains(year)) {
    throw ValidationError("year " + std::to_string(year) + " outside range of entity '" +
                          entity.name + "'");
  }
  if (keyword >= keyword_count()) throw ValidationError("keyword index out of range");
  return t.counts(t.row(year), static_cast<Eigen::Index>(keyword));
}

std::string Corpus::fingerprint() const { return sha256_hex(serialize_corpus(*this)); }

bool Corpus::operator==(const Corpus& other) const {
  if (keywords() != other.keywords() || tables_.size() != other.tables_.size()) return false;
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    const auto& a = tables_[i];
    const auto& b = other.tables_[i];
    if (a.entity != b.entity || a.years != b.years || a.counts != b.counts) return false;
  }
  return true;
}

void CorpusBuilder::add_keyword(std::string_view keyword) {
  auto canonical = canonical_keyword(keyword);
  if (canonical.empty()) throw ValidationError("empty keyword");
  keywords_.emplace(std::move(canonical), keywords_.size());
}

void CorpusBuilder::add_years(const EntityId& entity, int first, int last) {
  if (entity.name.empty()) throw ValidationError("empty entity name");
  if (first > last) throw ValidationError("empty year range for entity '" + entity.name + "'");
  auto [it, inserted] = ranges_.try_emplace(entity.name, YearRange{first, last});
  if (!inserted) {
    it->second.first = std::min(it->second.first, first);
    it->second.last = std::max(it->second.last, last);
  }
}

void CorpusBuilder::add(const EntityId& entity, int year, std::string_view keyword, Count count) {
  if (count < 0) {
    throw ValidationError("negative count " + std::to_string(count) + " for (" + entity.name +
                          ", " + std::to_string(year) + ", " + std::string(keyword) + ")");
  }
  auto canonical = canonical_keyword(keyword);
  if (canonical.empty()) throw ValidationError("empty keyword");
  if (entity.name.empty()) throw ValidationError("empty entity name");
  CellKey key{entity.name, year, canonical};
  if (cells_.count(key)) {
    throw ValidationError("duplicate cell (" + entity.name + ", " + std::to_string(year) + ", " +
                          canonical + ")");
  }
  cells_.emplace(std::move(key), count);
  add_keyword(canonical);
  add_years(entity, year, year);
}

Corpus CorpusBuilder::build() const {
  // Keyword order does not matter here; Corpus sorts canonically.
  std::vector<std::string> keywords(keywords_.size());
  for (const auto& [keyword, index] : keywords_) keywords[index] = keyword;

  std::vector<EntityTable> tables;
  for (const auto& [name, range] : ranges_) {
    EntityTable table{EntityId{name}, range,
                      CountMatrix::Zero(range.size(), static_cast<Eigen::Index>(keywords.size()))};
    tables.push_back(std::move(table));
  }
  for (const auto& [key, count] : cells_) {
    const auto& [name, year, keyword] = key;
    auto& table = *std::find_if(tables.begin(), tables.end(),
                                [&](const EntityTable& t) { return t.entity.name == name; });
    table.counts(table.row(year), static_cast<Eigen::Index>(keywords_.at(keyword))) = count;
  }
  return Corpus(std::move(keywords), std::move(tables));
}

namespace {

template <typename T>
bool parse_integer(std::string_view text, T& out) {
  const auto trimmed = csv::trim(text);
  if (trimmed.empty()) return false;
  const char* begin = trimmed.data();
  const char* end = begin + trimmed.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (csv::trim(header[i]) == name) return i;
  }
  throw ValidationError("header is missing column '" + name + "'");
}

}  // namespace

Corpus read_corpus(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_number = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_number;
    if (!csv::trim(line).empty()) {
      if (line_number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      header = csv::split_record(line);
      break;
    }
  }
  if (header.empty()) throw ValidationError("empty corpus file");

  const std::size_t entity_col = column_of(header, schema.entity);
  const std::size_t year_col = column_of(header, schema.year);
  const std::size_t keyword_col = column_of(header, schema.keyword);
  const std::size_t count_col = column_of(header, schema.count);

  CorpusBuilder builder;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (csv::trim(line).empty()) continue;
    const auto where = "row " + std::to_string(line_number) + ": ";
    std::vector<std::string> fields;
    try {
      fields = csv::split_record(line);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    if (fields.size() != header.size()) {
      throw ValidationError(where + "expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
    }
    const auto entity = csv::trim(fields[entity_col]);
    const auto keyword = csv::trim(fields[keyword_col]);
    if (entity.empty()) throw ValidationError(where + "empty entity");
    if (keyword.empty()) throw ValidationError(where + "empty keyword");
    int year = 0;
    if (!parse_integer(fields[year_col], year)) {
      throw ValidationError(where + "malformed year '" + fields[year_col] + "'");
    }
    Count count = 0;
    if (!parse_integer(fields[count_col], count)) {
      throw ValidationError(where + "malformed count '" + fields[count_col] + "'");
    }
    try {
      builder.add(EntityId{entity}, year, keyword, count);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    ++rows;
  }
  if (rows == 0) throw ValidationError("empty corpus file: no data rows");
  return builder.build();
}

Corpus load_corpus(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file '" + path.string() + "'");
  return read_corpus(in, schema);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  const auto& keywords = corpus.keywords();
  const auto& tables = corpus.tables();
  const auto k = static_cast<Eigen::Index>(keywords.size());

  // (table index, year, keyword index) tuples sort into canonical order
  // because tables and keywords are already sorted by name.
  std::set<std::tuple<std::size_t, int, Eigen::Index>> zero_markers;
  for (Eigen::Index c = 0; c < k; ++c) {
    const bool all_zero = std::all_of(tables.begin(), tables.end(), [&](const EntityTable& t) {
      return (t.counts.col(c).array() == 0).all();
    });
    if (all_zero) zero_markers.emplace(0, tables.front().years.first, c);
  }

  out << "entity,year,keyword,count\n";
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const auto& table = tables[t];
    for (int year = table.years.first; year <= table.years.last; ++year) {
      const auto row = table.counts.row(table.row(year));
      if ((row.array() == 0).all()) zero_markers.emplace(t, year, 0);
      for (Eigen::Index c = 0; c < k; ++c) {
        const Count n = row(c);
        if (n != 0 || zero_markers.count({t, year, c})) {
          csv::write_record(out, {table.entity.name, std::to_string(year),
                                  keywords[static_cast<std::size_t>(c)], std::to_string(n)});
        }
      }
    }
  }
}

std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream out;
  write_corpus(out, corpus);
  return out.str();
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file '" + path.string() + "'");
  write_corpus(out, corpus);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

VolumeSeries total_volume(const Corpus& corpus, const EntityId& entity) {
  const auto& table = corpus.table(entity);
  VolumeSeries series{entity, {}, table.counts.rowwise().sum()};
  series.years.resize(static_cast<std::size_t>(table.years.size()));
  std::iota(series.years.begin(), series.years.end(), table.years.first);
  return series;
}

Corpus restrict_years(const Corpus& corpus, const EntityId& entity, int first, int last) {
  if (first > last) throw ValidationError("restrict_years: first year after last year");
  const auto& source = corpus.table(entity);
  const int lo = std::max(first, source.years.first);
  const int hi = std::min(last, source.years.last);
  if (lo > hi) {
    throw ValidationError("restrict_years: [" + std::to_string(first) + ", " +
                          std::to_string(last) + "] is disjoint from the data of '" +
                          entity.name + "'");
  }
  std::vector<EntityTable> tables = corpus.tables();
  for (auto& table : tables) {
    if (table.entity != entity) continue;
    CountMatrix clipped = table.counts.middleRows(table.row(lo), hi - lo + 1);
    table.years = YearRange{lo, hi};
    table.counts = std::move(clipped);
  }
  return Corpus(corpus.keywords(), std::move(tables));
}

}  // namespace pubtrend
