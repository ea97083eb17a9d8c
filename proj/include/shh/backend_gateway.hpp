#pragma once

// Uniform access to generation backends. Concrete backends: replay fixtures
// and scripted functions live here; the HTTP client is in http_transport.hpp.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "shh/error.hpp"
#include "shh/types.hpp"

namespace shh {

enum class Role { Internal, External, Ger, Arbiter, Rewrite };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::Internal: return "internal";
    case Role::External: return "external";
    case Role::Ger: return "ger";
    case Role::Arbiter: return "arbiter";
    case Role::Rewrite: return "rewrite";
  }
  return "";
}

inline Role role_from_string(std::string_view s) {
  for (Role r : {Role::Internal, Role::External, Role::Ger, Role::Arbiter, Role::Rewrite}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::SchemaError, "unknown role '" + std::string(s) + "'");
}

inline constexpr Role kAllRoles[] = {Role::Internal, Role::External, Role::Ger,
                                     Role::Arbiter, Role::Rewrite};

enum class BackendKind { Http, Replay, Scripted };

inline std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Http: return "http";
    case BackendKind::Replay: return "replay";
    case BackendKind::Scripted: return "scripted";
  }
  return "";
}

struct DecodeParams {
  double temperature = 0.0;  // greedy by default
  int max_tokens = 512;
  int timeout_ms = 30000;
  int retries = 0;
};

struct BackendSpec {
  std::string backend_id;
  BackendKind kind = BackendKind::Scripted;
  std::optional<std::string> endpoint_url;  // http only
  std::optional<std::string> fixture_path;  // replay only
  std::optional<std::string> model_id;
  DecodeParams params;

  void validate() const {
    if (backend_id.empty()) throw Error(ErrorCode::ConfigError, "backend_id is empty");
    if (endpoint_url.has_value() != (kind == BackendKind::Http)) {
      throw Error(ErrorCode::ConfigError,
                  "backend '" + backend_id + "': endpoint_url is required for and only for http");
    }
    if (fixture_path.has_value() != (kind == BackendKind::Replay)) {
      throw Error(ErrorCode::ConfigError,
                  "backend '" + backend_id + "': fixture_path is required for and only for replay");
    }
  }
};

struct GenerationRequest {
  std::string sample_id;
  Role role = Role::Internal;
  std::string prompt;
  std::string template_id;
  std::string audio_ref;
  std::optional<std::int64_t> seed = 0;
  DecodeParams params;

  void validate() const {
    if (params.temperature > 0.0 && !seed) {
      throw Error(ErrorCode::InvalidArgument,
                  "sampling request for '" + sample_id + "' has no seed");
    }
  }
};

struct GenerationResult {
  std::string text;
  std::int64_t latency_ms = 0;
  std::string backend_id;
  std::int64_t seed = 0;
  bool truncated = false;
};

class Backend {
 public:
  explicit Backend(BackendSpec spec) : spec_(std::move(spec)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendSpec& spec() const { return spec_; }

  /// One attempt; no retries. Must be safe to call concurrently.
  virtual GenerationResult generate(const GenerationRequest& req) = 0;

 private:
  BackendSpec spec_;
};

// ---------------------------------------------------------------------------

/// Recorded decode keyed by (sample_id or audio_ref, role, seed). A row may
/// instead carry an "error" code to replay a failure.
struct FixtureRow {
  std::optional<std::string> sample_id;
  std::optional<std::string> audio_ref;
  Role role = Role::Internal;
  std::int64_t seed = 0;
  std::string text;
  std::int64_t latency_ms = 0;
  bool truncated = false;
  std::optional<std::string> error;
  int http_status = 0;
};

inline FixtureRow fixture_row_from_json(const json& j) {
  FixtureRow row;
  row.sample_id = detail::optional_string(j, "sample_id");
  row.audio_ref = detail::optional_string(j, "audio_ref");
  if (!row.sample_id && !row.audio_ref) {
    throw Error(ErrorCode::SchemaError, "fixture row needs sample_id or audio_ref");
  }
  row.role = role_from_string(detail::require_string(j, "role"));
  row.seed = j.value("seed", std::int64_t{0});
  row.error = detail::optional_string(j, "error");
  if (!row.error) row.text = detail::require_string(j, "text");
  row.latency_ms = j.value("latency_ms", std::int64_t{0});
  row.truncated = j.value("truncated", false);
  row.http_status = j.value("http_status", 0);
  return row;
}

inline json to_json(const FixtureRow& row) {
  json j = {{"role", std::string(to_string(row.role))}, {"seed", row.seed}};
  if (row.sample_id) j["sample_id"] = *row.sample_id;
  if (row.audio_ref) j["audio_ref"] = *row.audio_ref;
  if (row.error) {
    j["error"] = *row.error;
  } else {
    j["text"] = row.text;
  }
  return j;
}

inline ErrorCode error_code_from_string(std::string_view s) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c) {
    if (to_string(static_cast<ErrorCode>(c)) == s) return static_cast<ErrorCode>(c);
  }
  throw Error(ErrorCode::SchemaError, "unknown error code '" + std::string(s) + "'");
}

/// Read-only lookup table. Entries keyed by audio_ref take precedence over
/// entries keyed by sample_id, so decodes of enhanced audio can be recorded
/// separately from the original.
class ReplayBackend final : public Backend {
 public:
  ReplayBackend(BackendSpec spec, const std::vector<FixtureRow>& rows)
      : Backend(std::move(spec)) {
    for (const auto& row : rows) add(row);
  }

  GenerationResult generate(const GenerationRequest& req) override {
    const std::int64_t seed = req.seed.value_or(0);
    const FixtureRow* row = nullptr;
    if (auto it = by_audio_.find({req.audio_ref, req.role, seed}); it != by_audio_.end()) {
      row = &it->second;
    } else if (auto jt = by_sample_.find({req.sample_id, req.role, seed});
               jt != by_sample_.end()) {
      row = &jt->second;
    }
    if (!row) {
      throw Error(ErrorCode::FixtureMiss,
                  "no fixture for (" + req.sample_id + ", " +
                      std::string(to_string(req.role)) + ", " + std::to_string(seed) + ")");
    }
    if (row->error) {
      throw Error(error_code_from_string(*row->error),
                  "replayed failure for " + req.sample_id, row->http_status);
    }
    return {row->text, row->latency_ms, spec().backend_id, seed, row->truncated};
  }

  std::size_t size() const { return by_sample_.size() + by_audio_.size(); }

 private:
  using Key = std::tuple<std::string, Role, std::int64_t>;

  void add(const FixtureRow& row) {
    auto& table = row.audio_ref ? by_audio_ : by_sample_;
    Key key{row.audio_ref ? *row.audio_ref : *row.sample_id, row.role, row.seed};
    if (!table.emplace(key, row).second) {
      throw Error(ErrorCode::SchemaError,
                  "duplicate fixture key (" + std::get<0>(key) + ", " +
                      std::string(to_string(row.role)) + ", " + std::to_string(row.seed) + ")");
    }
  }

  std::map<Key, FixtureRow> by_sample_;
  std::map<Key, FixtureRow> by_audio_;
};

/// Backend whose output is a programmed function of the request.
class ScriptedBackend final : public Backend {
 public:
  using Script = std::function<std::string(const GenerationRequest&)>;

  ScriptedBackend(BackendSpec spec, Script script)
      : Backend(std::move(spec)), script_(std::move(script)) {}
  explicit ScriptedBackend(Script script)
      : ScriptedBackend(scripted_spec(), std::move(script)) {}

  static BackendSpec scripted_spec() {
    BackendSpec s;
    s.backend_id = "scripted";
    return s;
  }

  GenerationResult generate(const GenerationRequest& req) override {
    return {script_(req), 0, spec().backend_id, req.seed.value_or(0), false};
  }

 private:
  Script script_;
};

// ---------------------------------------------------------------------------

/// Single request with the backend's retry budget applied to transient
/// failures (timeouts, 5xx).
inline GenerationResult generate(Backend& backend, const GenerationRequest& req) {
  req.validate();
  const int retries = std::max(0, req.params.retries);
  for (int attempt = 0;; ++attempt) {
    try {
      return backend.generate(req);
    } catch (const Error& e) {
      if (!e.transient() || attempt >= retries) throw;
    }
  }
}

/// Outcome of one slot of a k-sample decode.
struct SlotResult {
  std::int64_t seed = 0;
  std::optional<GenerationResult> result;
  std::optional<Error> error;

  bool ok() const { return result.has_value(); }
};

namespace detail {

inline void check_seeds(std::span<const std::int64_t> seeds) {
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  std::unordered_set<std::int64_t> seen;
  for (auto s : seeds) {
    if (!seen.insert(s).second) {
      throw Error(ErrorCode::InvalidArgument, "seeds must be distinct");
    }
  }
}

template <typename Call>
std::vector<SlotResult> run_slots(std::span<const std::int64_t> seeds, Call call) {
  check_seeds(seeds);
  std::vector<SlotResult> slots(seeds.size());
  auto run_one = [&](std::size_t i) {
    slots[i].seed = seeds[i];
    try {
      slots[i].result = call(seeds[i]);
    } catch (const Error& e) {
      slots[i].error = e;
    } catch (const std::exception& e) {
      slots[i].error = Error(ErrorCode::BackendError, e.what());
    }
  };
  if (seeds.size() == 1) {
    run_one(0);
    return slots;
  }
  {
    std::vector<std::jthread> threads;
    threads.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) threads.emplace_back(run_one, i);
  }
  return slots;
}

}  // namespace detail

/// k decodes of the same request, one per seed, returned in seed-list order
/// regardless of completion order. Failures stay in their slot.
inline std::vector<SlotResult> sample_k(Backend& backend, const GenerationRequest& req,
                                        std::size_t k, std::span<const std::int64_t> seeds) {
  if (k != seeds.size()) {
    throw Error(ErrorCode::InvalidArgument, "expected exactly k seeds");
  }
  return detail::run_slots(seeds, [&](std::int64_t seed) {
    GenerationRequest r = req;
    r.seed = seed;
    return generate(backend, r);
  });
}

/// Role-addressed access to backends with a global in-flight limit. Shareable
/// across worker threads once bound.
class Gateway {
 public:
  static constexpr std::ptrdiff_t kMaxInFlight = 1024;

  explicit Gateway(std::ptrdiff_t max_in_flight = 64)
      : in_flight_(std::clamp<std::ptrdiff_t>(max_in_flight, 1, kMaxInFlight)) {}

  void bind(Role role, std::shared_ptr<Backend> backend) {
    backends_[role] = std::move(backend);
  }

  bool has(Role role) const { return backends_.contains(role); }

  Backend& backend(Role role) const {
    auto it = backends_.find(role);
    if (it == backends_.end()) {
      throw Error(ErrorCode::ConfigError,
                  "no backend bound for role '" + std::string(to_string(role)) + "'");
    }
    return *it->second;
  }

  /// Request pre-filled with the role backend's default decode parameters.
  GenerationRequest request(Role role, const std::string& sample_id,
                            std::string prompt, std::string template_id,
                            const std::string& audio_ref, std::int64_t seed = 0) const {
    GenerationRequest r;
    r.sample_id = sample_id;
    r.role = role;
    r.prompt = std::move(prompt);
    r.template_id = std::move(template_id);
    r.audio_ref = audio_ref;
    r.seed = seed;
    r.params = backend(role).spec().params;
    return r;
  }

  GenerationResult generate(const GenerationRequest& req) const {
    Backend& b = backend(req.role);
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<kMaxInFlight>& s;
      ~Release() { s.release(); }
    } release{in_flight_};
    return shh::generate(b, req);
  }

  std::vector<SlotResult> sample_k(const GenerationRequest& req,
                                   std::span<const std::int64_t> seeds) const {
    return detail::run_slots(seeds, [&](std::int64_t seed) {
      GenerationRequest r = req;
      r.seed = seed;
      return generate(r);
    });
  }

  const std::map<Role, std::shared_ptr<Backend>>& backends() const { return backends_; }

 private:
  std::map<Role, std::shared_ptr<Backend>> backends_;
  mutable std::counting_semaphore<kMaxInFlight> in_flight_;
};

}  // namespace shh
