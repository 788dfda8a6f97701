// Eigen must precede httplib: <resolv.h> defines a `_res` macro.
#include "pubtrend/harvester.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <random>
#include <thread>

#include "pubtrend/csv.hpp"
#include "pubtrend/digest.hpp"
#include "pubtrend/log.hpp"

namespace pubtrend {

using nlohmann::json;

namespace {

std::string now_iso8601() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

std::string percent_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 15]);
    }
  }
  return out;
}

void replace_all(std::string& text, std::string_view token, std::string_view value) {
  for (auto pos = text.find(token); pos != std::string::npos;
       pos = text.find(token, pos + value.size())) {
    text.replace(pos, token.size(), value);
  }
}

Count fixture_count(const Corpus& fixture, const std::string& entity, const std::string& keyword,
                    int year) {
  const EntityId id{entity};
  if (!fixture.has_entity(id)) return 0;
  const auto k = fixture.find_keyword(keyword);
  const auto& table = fixture.table(id);
  if (!k || !table.years.contains(year)) return 0;
  return table.counts(table.row(year), static_cast<Eigen::Index>(*k));
}

Count parse_count_body(const std::string& body) {
  const std::string trimmed = csv::trim(body);
  Count value = 0;
  auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  if (!trimmed.empty() && ec == std::errc() && ptr == trimmed.data() + trimmed.size()) {
    if (value < 0) throw MalformedResponseError("endpoint returned a negative count");
    return value;
  }
  try {
    const auto doc = json::parse(trimmed);
    const auto& count = doc.at("count");
    if (!count.is_number_integer()) throw MalformedResponseError("\"count\" is not an integer");
    value = count.get<Count>();
  } catch (const json::exception&) {
    throw MalformedResponseError("endpoint response is not a count: '" + trimmed.substr(0, 80) +
                                 "'");
  }
  if (value < 0) throw MalformedResponseError("endpoint returned a negative count");
  return value;
}

}  // namespace

std::string CountQuery::canonical_key() const {
  const json key{{"affiliation", affiliation},
                 {"entity", entity},
                 {"keyword", canonical_keyword(keyword)},
                 {"year", year}};
  return key.dump();
}

std::string_view source_name(ResponseSource source) {
  switch (source) {
    case ResponseSource::kLive: return "LIVE";
    case ResponseSource::kCache: return "CACHE";
    case ResponseSource::kFixture: return "FIXTURE";
  }
  return "?";
}

//
// Transports
//

Count FixtureTransport::fetch_count(const CountQuery& query) {
  ++calls_;
  return fixture_count(fixture_, query.entity, query.keyword, query.year);
}

UrlTransport::UrlTransport(std::string url_template, std::chrono::milliseconds timeout)
    : url_template_(std::move(url_template)), timeout_(timeout) {
  if (url_template_.rfind("http://", 0) != 0 && url_template_.rfind("https://", 0) != 0) {
    throw ValidationError("url template must start with http:// or https://");
  }
}

std::string UrlTransport::expand(const CountQuery& query) const {
  std::string url = url_template_;
  replace_all(url, "{keyword}", percent_encode(canonical_keyword(query.keyword)));
  replace_all(url, "{entity}", percent_encode(query.entity));
  replace_all(url, "{affiliation}", percent_encode(query.affiliation));
  replace_all(url, "{year}", std::to_string(query.year));
  return url;
}

Count UrlTransport::fetch_count(const CountQuery& query) {
  const std::string url = expand(query);
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  auto result = client.Get(path);
  if (!result) {
    throw TransportError("request to " + origin + " failed: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw TransportError("endpoint returned HTTP " + std::to_string(result->status));
  }
  return parse_count_body(result->body);
}

struct FixtureServer::Impl {
  Corpus fixture;
  httplib::Server server;
  std::thread thread;
  std::atomic<std::size_t> requests{0};

  explicit Impl(Corpus c) : fixture(std::move(c)) {}
};

FixtureServer::FixtureServer(Corpus fixture) : impl_(std::make_unique<Impl>(std::move(fixture))) {
  impl_->server.Get("/count", [this](const httplib::Request& req, httplib::Response& res) {
    ++impl_->requests;
    int year = 0;
    const auto year_text = req.get_param_value("year");
    auto [ptr, ec] = std::from_chars(year_text.data(), year_text.data() + year_text.size(), year);
    if (ec != std::errc() || ptr != year_text.data() + year_text.size() ||
        !req.has_param("keyword") || !req.has_param("entity")) {
      res.status = 400;
      res.set_content(R"({"error":"expected keyword, entity and year"})", "application/json");
      return;
    }
    const Count n = fixture_count(impl_->fixture, req.get_param_value("entity"),
                                  req.get_param_value("keyword"), year);
    res.set_content(json{{"count", n}}.dump(), "application/json");
  });
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw IoError("fixture server could not bind a local port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

FixtureServer::~FixtureServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string FixtureServer::url_template() const {
  return "http://127.0.0.1:" + std::to_string(port_) +
         "/count?keyword={keyword}&entity={entity}&affiliation={affiliation}&year={year}";
}

std::size_t FixtureServer::requests() const { return impl_->requests.load(); }

//
// Cache
//

CountCache::CountCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (ec) throw IoError("cannot create cache directory '" + directory_.string() + "'");
}

std::filesystem::path CountCache::entry_path(const CountQuery& query) const {
  return directory_ / (sha256_hex(query.canonical_key()) + ".json");
}

std::mutex& CountCache::stripe(const std::string& key) const {
  return stripes_[std::hash<std::string>{}(key) % stripes_.size()];
}

std::optional<CountResponse> CountCache::lookup(const CountQuery& query) const {
  const auto key = query.canonical_key();
  const auto path = entry_path(query);
  std::lock_guard lock(stripe(key));
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const auto doc = json::parse(in);
    if (doc.at("key").get<std::string>() != key) {
      throw std::runtime_error("key mismatch");
    }
    const auto count = doc.at("count").get<Count>();
    if (count < 0) throw std::runtime_error("negative count");
    return CountResponse{query, count, doc.at("retrieved_at").get<std::string>(),
                         ResponseSource::kCache};
  } catch (const std::exception& e) {
    log_warning("ignoring corrupt cache entry " + path.string() + ": " + e.what());
    return std::nullopt;
  }
}

void CountCache::store(const CountResponse& response) {
  const auto key = response.query.canonical_key();
  const auto path = entry_path(response.query);
  const json doc{{"key", key},
                 {"count", response.count},
                 {"retrieved_at", response.retrieved_at},
                 {"source", source_name(response.source)}};
  thread_local std::mt19937_64 suffix_rng{std::random_device{}()};
  std::lock_guard lock(stripe(key));
  auto tmp = path;
  tmp += ".tmp" + std::to_string(suffix_rng());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump() << '\n';
    if (!out.flush()) {
      std::filesystem::remove(tmp);
      throw IoError("cannot write cache entry " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot commit cache entry " + path.string() + ": " + ec.message());
  }
}

//
// Rate limiting
//

RateLimiter::RateLimiter(double requests_per_second) {
  if (requests_per_second < 0.0 || !std::isfinite(requests_per_second)) {
    throw ValidationError("rate limit must be finite and non-negative");
  }
  enabled_ = requests_per_second > 0.0;
  if (enabled_) {
    interval_ = std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(1.0 / requests_per_second));
  }
}

void RateLimiter::acquire() {
  if (!enabled_) return;
  Clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    slot = std::max(Clock::now(), next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

//
// Plans
//

std::vector<CountQuery> QueryPlan::queries() const {
  std::vector<CountQuery> out;
  for (const auto& keyword : keywords) {
    for (const auto& entity : entities) {
      for (int year = first_year; year <= last_year; ++year) {
        out.push_back({canonical_keyword(keyword), entity.entity, entity.affiliation, year});
      }
    }
  }
  return out;
}

void validate_plan(const QueryPlan& plan) {
  if (plan.keywords.empty()) throw ValidationError("plan has no keywords");
  if (plan.entities.empty()) throw ValidationError("plan has no entities");
  for (const auto& k : plan.keywords) {
    if (canonical_keyword(k).empty()) throw ValidationError("plan contains an empty keyword");
  }
  for (const auto& e : plan.entities) {
    if (e.entity.empty()) throw ValidationError("plan contains an unnamed entity");
  }
  if (plan.first_year > plan.last_year) throw ValidationError("plan year range is empty");
  const auto& p = plan.politeness;
  if (p.max_requests_per_second < 0.0) throw ValidationError("plan rate limit is negative");
  if (p.max_concurrent < 1) throw ValidationError("plan max_concurrent must be >= 1");
  if (p.max_retries < 0) throw ValidationError("plan max_retries must be >= 0");
  if (p.backoff_initial_seconds < 0.0 || p.backoff_multiplier < 1.0) {
    throw ValidationError("plan backoff must be non-negative with multiplier >= 1");
  }
  if (plan.endpoint.kind == EndpointDescriptor::Kind::kUrl && plan.endpoint.url_template.empty()) {
    throw ValidationError("url endpoint needs a url_template");
  }
  if (plan.endpoint.kind == EndpointDescriptor::Kind::kFixture &&
      plan.endpoint.fixture_path.empty()) {
    throw ValidationError("fixture endpoint needs a fixture path");
  }
}

QueryPlan parse_query_plan(std::string_view json_text) {
  QueryPlan plan;
  try {
    const auto doc = json::parse(json_text);
    plan.keywords = doc.at("keywords").get<std::vector<std::string>>();
    for (const auto& e : doc.at("entities")) {
      plan.entities.push_back({e.at("entity").get<std::string>(), e.value("affiliation", "")});
    }
    plan.first_year = doc.at("first_year").get<int>();
    plan.last_year = doc.at("last_year").get<int>();
    const auto& endpoint = doc.at("endpoint");
    const auto kind = endpoint.at("kind").get<std::string>();
    if (kind == "url") {
      plan.endpoint.kind = EndpointDescriptor::Kind::kUrl;
      plan.endpoint.url_template = endpoint.at("url_template").get<std::string>();
    } else if (kind == "fixture") {
      plan.endpoint.kind = EndpointDescriptor::Kind::kFixture;
      plan.endpoint.fixture_path = endpoint.at("fixture").get<std::string>();
    } else {
      throw ValidationError("unknown endpoint kind '" + kind + "'");
    }
    if (doc.contains("politeness")) {
      const auto& p = doc.at("politeness");
      auto& policy = plan.politeness;
      policy.max_requests_per_second =
          p.value("max_requests_per_second", policy.max_requests_per_second);
      policy.max_concurrent = p.value("max_concurrent", policy.max_concurrent);
      policy.max_retries = p.value("max_retries", policy.max_retries);
      policy.backoff_initial_seconds =
          p.value("backoff_initial_seconds", policy.backoff_initial_seconds);
      policy.backoff_multiplier = p.value("backoff_multiplier", policy.backoff_multiplier);
    }
    plan.cache_dir = doc.value("cache_dir", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed query plan: ") + e.what());
  }
  validate_plan(plan);
  return plan;
}

QueryPlan load_query_plan(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open query plan '" + path.string() + "'");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  auto plan = parse_query_plan(text);
  const auto base = path.parent_path();
  if (!plan.endpoint.fixture_path.empty() && plan.endpoint.fixture_path.is_relative()) {
    plan.endpoint.fixture_path = base / plan.endpoint.fixture_path;
  }
  if (!plan.cache_dir.empty() && plan.cache_dir.is_relative()) plan.cache_dir = base / plan.cache_dir;
  return plan;
}

std::unique_ptr<CountTransport> make_transport(const QueryPlan& plan) {
  if (plan.endpoint.kind == EndpointDescriptor::Kind::kUrl) {
    return std::make_unique<UrlTransport>(plan.endpoint.url_template);
  }
  return std::make_unique<FixtureTransport>(load_corpus(plan.endpoint.fixture_path));
}

//
// Execution
//

std::size_t HarvestOutcome::missing() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) {
    return r.status == CellStatus::kMissing;
  }));
}

HarvestOutcome execute_plan(const QueryPlan& plan, CountTransport& transport) {
  validate_plan(plan);
  const auto queries = plan.queries();
  const auto& policy = plan.politeness;
  std::optional<CountCache> cache;
  if (!plan.cache_dir.empty()) cache.emplace(plan.cache_dir);
  RateLimiter limiter(policy.max_requests_per_second);

  std::vector<ProvenanceRecord> records(queries.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  std::atomic<std::size_t> hits{0};

  auto process = [&](const CountQuery& query, ProvenanceRecord& record) {
    record.query = query;
    if (cache) {
      if (auto cached = cache->lookup(query)) {
        record.count = cached->count;
        record.source = ResponseSource::kCache;
        record.timestamp = cached->retrieved_at;
        ++hits;
        return;
      }
    }
    record.source = transport.source();
    double backoff = policy.backoff_initial_seconds;
    for (int attempt = 0;; ++attempt) {
      limiter.acquire();
      ++calls;
      try {
        const Count n = transport.fetch_count(query);
        if (n < 0) throw MalformedResponseError("transport returned a negative count");
        record.count = n;
        record.timestamp = now_iso8601();
        break;
      } catch (const TransportError& e) {
        if (attempt >= policy.max_retries) {
          record.status = CellStatus::kMissing;
          record.message = e.what();
          break;
        }
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff *= policy.backoff_multiplier;
      } catch (const std::exception& e) {
        record.status = CellStatus::kMissing;
        record.message = e.what();
        break;
      }
    }
    if (record.status == CellStatus::kMissing) {
      record.timestamp = now_iso8601();
      log_warning("MISSING " + query.canonical_key() + ": " + record.message);
      return;
    }
    if (cache) {
      try {
        cache->store({query, *record.count, record.timestamp, record.source});
      } catch (const IoError& e) {
        log_warning(e.what());
      }
    }
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < queries.size(); i = next++) process(queries[i], records[i]);
  };
  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(policy.max_concurrent), queries.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  return HarvestOutcome{std::move(records), calls.load(), hits.load()};
}

Corpus assemble_corpus(const QueryPlan& plan, const HarvestOutcome& outcome,
                       MissingPolicy policy) {
  const auto missing = outcome.missing();
  if (missing > 0 && policy == MissingPolicy::kFail) {
    throw ValidationError(std::to_string(missing) +
                          " cell(s) are MISSING; refusing to build a corpus (fill-zero policy "
                          "must be requested explicitly)");
  }
  CorpusBuilder builder;
  for (const auto& k : plan.keywords) builder.add_keyword(k);
  for (const auto& e : plan.entities) {
    builder.add_years(EntityId{e.entity}, plan.first_year, plan.last_year);
  }
  for (const auto& record : outcome.records) {
    builder.add(EntityId{record.query.entity}, record.query.year, record.query.keyword,
                record.count.value_or(0));
  }
  return builder.build();
}

void write_provenance(std::ostream& out, const std::vector<ProvenanceRecord>& records,
                      bool with_header) {
  if (with_header) out << "keyword,entity,year,count,source,timestamp,status\n";
  for (const auto& r : records) {
    csv::write_record(out, {r.query.keyword, r.query.entity, std::to_string(r.query.year),
                            r.count ? std::to_string(*r.count) : std::string(),
                            std::string(source_name(r.source)), r.timestamp,
                            r.status == CellStatus::kOk ? "OK" : "MISSING"});
  }
}

void append_provenance(const std::filesystem::path& path,
                       const std::vector<ProvenanceRecord>& records) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open provenance log '" + path.string() + "'");
  write_provenance(out, records, fresh);
  if (!out) throw IoError("write failed for provenance log '" + path.string() + "'");
}

}  // namespace pubtrend
