#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace pubtrend {

using Count = std::int64_t;

// Rows are years (ascending), columns are keywords in corpus order.
using CountMatrix = Eigen::Matrix<Count, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CountVector = Eigen::VectorX<Count>;

struct EntityId {
  std::string name;

  auto operator<=>(const EntityId&) const = default;
};

struct YearRange {
  int first = 0;
  int last = -1;

  int size() const { return last >= first ? last - first + 1 : 0; }
  bool contains(int year) const { return year >= first && year <= last; }
  bool operator==(const YearRange&) const = default;
};

struct EntityTable {
  EntityId entity;
  YearRange years;
  CountMatrix counts;

  Eigen::Index row(int year) const { return year - years.first; }
};

// Total publication volume per year, summed over keywords.
struct VolumeSeries {
  EntityId entity;
  std::vector<int> years;
  CountVector totals;

  std::size_t size() const { return years.size(); }
};

// Canonical keyword form: trimmed, lower-case.
std::string canonical_keyword(std::string_view keyword);

// Immutable table of counts indexed by (entity, year, keyword). Keywords and
// entities are held in sorted canonical order so two corpora with the same
// content compare equal regardless of how they were assembled.
class Corpus {
 public:
  using KeywordList = std::shared_ptr<const std::vector<std::string>>;

  Corpus(std::vector<std::string> keywords, std::vector<EntityTable> tables);

  const std::vector<std::string>& keywords() const { return *keywords_; }
  const KeywordList& keyword_list() const { return keywords_; }
  std::size_t keyword_count() const { return keywords_->size(); }

  std::optional<std::size_t> find_keyword(std::string_view keyword) const;
  std::size_t keyword_index(std::string_view keyword) const;

  std::vector<EntityId> entities() const;
  bool has_entity(const EntityId& entity) const;
  const EntityTable& table(const EntityId& entity) const;
  const std::vector<EntityTable>& tables() const { return tables_; }
  YearRange years(const EntityId& entity) const { return table(entity).years; }

  Count count(const EntityId& entity, int year, std::size_t keyword) const;

  // SHA-256 of the canonical serialization.
  std::string fingerprint() const;

  bool operator==(const Corpus& other) const;

 private:
  KeywordList keywords_;
  std::unordered_map<std::string, std::size_t> keyword_lookup_;
  std::vector<EntityTable> tables_;
};

// Accumulates sparse cells, rejecting duplicates and negative counts, then
// produces a dense Corpus. Absent cells inside an entity's year range are 0.
class CorpusBuilder {
 public:
  void add_keyword(std::string_view keyword);
  void add_years(const EntityId& entity, int first, int last);
  void add(const EntityId& entity, int year, std::string_view keyword, Count count);

  Corpus build() const;

 private:
  using CellKey = std::tuple<std::string, int, std::string>;

  std::map<std::string, std::size_t> keywords_;
  std::map<std::string, YearRange> ranges_;
  std::map<CellKey, Count> cells_;
};

struct CsvSchema {
  std::string entity = "entity";
  std::string year = "year";
  std::string keyword = "keyword";
  std::string count = "count";
};

Corpus read_corpus(std::istream& in, const CsvSchema& schema = {});
Corpus load_corpus(const std::filesystem::path& path, const CsvSchema& schema = {});

// Canonical form: header `entity,year,keyword,count`, rows ordered by
// (entity, year, keyword). Nonzero cells are written, plus one zero row per
// all-zero year and per all-zero keyword so ranges and the keyword list
// survive a round trip.
void write_corpus(std::ostream& out, const Corpus& corpus);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

VolumeSeries total_volume(const Corpus& corpus, const EntityId& entity);

// Clips one entity's years to [first, last]; other entities are untouched.
Corpus restrict_years(const Corpus& corpus, const EntityId& entity, int first, int last);

}  // namespace pubtrend
