#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pubtrend/corpus.hpp"
#include "pubtrend/error.hpp"

namespace pubtrend {

//
// Queries and responses
//

struct CountQuery {
  std::string keyword;
  std::string entity;
  std::string affiliation;  // passed to the endpoint verbatim
  int year = 0;

  // Sorted-field JSON with the keyword in canonical (trimmed, lower-case) form.
  std::string canonical_key() const;
};

enum class ResponseSource { kLive, kCache, kFixture };
std::string_view source_name(ResponseSource source);

struct CountResponse {
  CountQuery query;
  Count count = 0;
  std::string retrieved_at;  // ISO-8601 UTC
  ResponseSource source = ResponseSource::kLive;
};

// Retryable failure to reach the endpoint.
class TransportError : public IoError {
 public:
  using IoError::IoError;
};

// Endpoint answered with something that is not a count. Not retried.
class MalformedResponseError : public IoError {
 public:
  using IoError::IoError;
};

class CountTransport {
 public:
  virtual ~CountTransport() = default;
  // Throws TransportError or MalformedResponseError.
  virtual Count fetch_count(const CountQuery& query) = 0;
  virtual ResponseSource source() const { return ResponseSource::kLive; }
};

// Answers from an in-memory corpus; absent cells are 0. Thread-safe.
class FixtureTransport : public CountTransport {
 public:
  explicit FixtureTransport(Corpus fixture) : fixture_(std::move(fixture)) {}

  Count fetch_count(const CountQuery& query) override;
  ResponseSource source() const override { return ResponseSource::kFixture; }
  std::size_t calls() const { return calls_.load(); }

 private:
  Corpus fixture_;
  std::atomic<std::size_t> calls_{0};
};

// Generic parameterised-URL endpoint. The template may contain {keyword},
// {entity}, {affiliation} and {year}; values are percent-encoded. The body
// must be a bare integer or a JSON object with an integer "count" field.
class UrlTransport : public CountTransport {
 public:
  explicit UrlTransport(std::string url_template,
                        std::chrono::milliseconds timeout = std::chrono::seconds(30));

  Count fetch_count(const CountQuery& query) override;
  std::string expand(const CountQuery& query) const;

 private:
  std::string url_template_;
  std::chrono::milliseconds timeout_;
};

// Serves counts from a fixture corpus over HTTP on 127.0.0.1, answering
// GET /count?keyword=..&entity=..&year=.. with {"count": n}. Unknown paths
// return 404. Intended for local testing of UrlTransport.
class FixtureServer {
 public:
  explicit FixtureServer(Corpus fixture);
  ~FixtureServer();
  FixtureServer(const FixtureServer&) = delete;
  FixtureServer& operator=(const FixtureServer&) = delete;

  int port() const { return port_; }
  std::string url_template() const;
  std::size_t requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

//
// Cache
//

// One JSON file per canonical query, named by the SHA-256 of the key. Stores
// are atomic (write to a temporary file, then rename). Corrupt entries read as
// absent and are logged.
class CountCache {
 public:
  explicit CountCache(std::filesystem::path directory);

  std::optional<CountResponse> lookup(const CountQuery& query) const;
  void store(const CountResponse& response);
  std::filesystem::path entry_path(const CountQuery& query) const;

 private:
  std::mutex& stripe(const std::string& key) const;

  std::filesystem::path directory_;
  mutable std::array<std::mutex, 32> stripes_;
};

//
// Rate limiting
//

// Spaces requests at least 1/rate seconds apart (bucket depth of one), so no
// window of length T sees more than floor(T * rate) + 1 requests. A rate of 0
// disables limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;

  std::mutex mutex_;
  Clock::duration interval_{};
  Clock::time_point next_{};
  bool enabled_ = false;
};

//
// Plans
//

struct EntityFilter {
  std::string entity;
  std::string affiliation;
};

struct EndpointDescriptor {
  enum class Kind { kFixture, kUrl };
  Kind kind = Kind::kFixture;
  std::string url_template;
  std::filesystem::path fixture_path;  // corpus CSV
};

struct PolitenessPolicy {
  double max_requests_per_second = 1.0;
  int max_concurrent = 4;
  int max_retries = 3;
  double backoff_initial_seconds = 0.5;
  double backoff_multiplier = 2.0;
};

struct QueryPlan {
  std::vector<std::string> keywords;
  std::vector<EntityFilter> entities;
  int first_year = 0;
  int last_year = 0;
  EndpointDescriptor endpoint;
  PolitenessPolicy politeness;
  std::filesystem::path cache_dir;  // empty disables caching
  // The index only covers English-language records.
  std::string coverage_note =
      "English-language records only; non-English output is not counted";

  std::vector<CountQuery> queries() const;
};

// Throws ValidationError on an unusable plan.
void validate_plan(const QueryPlan& plan);
QueryPlan parse_query_plan(std::string_view json_text);
QueryPlan load_query_plan(const std::filesystem::path& path);

std::unique_ptr<CountTransport> make_transport(const QueryPlan& plan);

//
// Execution
//

enum class CellStatus { kOk, kMissing };

struct ProvenanceRecord {
  CountQuery query;
  std::optional<Count> count;  // empty when MISSING
  ResponseSource source = ResponseSource::kLive;
  std::string timestamp;
  CellStatus status = CellStatus::kOk;
  std::string message;
};

struct HarvestOutcome {
  std::vector<ProvenanceRecord> records;  // plan order: keyword, entity, year
  std::size_t transport_calls = 0;
  std::size_t cache_hits = 0;

  std::size_t missing() const;
};

// One record per (keyword, entity, year). Failures are retried per the plan's
// policy and then recorded as MISSING; the run itself still completes.
HarvestOutcome execute_plan(const QueryPlan& plan, CountTransport& transport);

enum class MissingPolicy { kFail, kFillZero };

// kFail throws ValidationError if any cell is MISSING; kFillZero writes 0 for
// those cells (the provenance log keeps them flagged).
Corpus assemble_corpus(const QueryPlan& plan, const HarvestOutcome& outcome,
                       MissingPolicy policy);

void write_provenance(std::ostream& out, const std::vector<ProvenanceRecord>& records,
                      bool with_header);
// Appends to `path`, writing the header only when the file is new or empty.
void append_provenance(const std::filesystem::path& path,
                       const std::vector<ProvenanceRecord>& records);

}  // namespace pubtrend
