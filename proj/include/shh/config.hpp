#pragma once

// Run configuration: one JSON file naming backends, role bindings, policy,
// normalization, seeds and tools. Relative fixture paths resolve against the
// config file's directory. SHH_BACKEND_<ROLE>_URL rebinds a role to an HTTP
// endpoint; SHH_AUTH_TOKEN supplies the bearer token.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "shh/backend_gateway.hpp"
#include "shh/digest.hpp"
#include "shh/http_transport.hpp"
#include "shh/jsonl.hpp"
#include "shh/prompt_templates.hpp"
#include "shh/router.hpp"
#include "shh/tool_actions.hpp"

namespace shh {

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
  return std::nullopt;
}

struct RunConfig {
  std::vector<BackendSpec> backends;
  std::map<Role, std::string> roles;  // role -> backend_id
  ArbitrationPolicy policy;
  RouterConfig router;
  std::ptrdiff_t max_in_flight = 64;
  std::size_t workers = 1;
  std::optional<std::string> auth_token;
  json tools_json = json::array();
  json effective;  // canonical form after defaults and overrides, minus secrets

  const BackendSpec& backend_for(Role role) const {
    auto it = roles.find(role);
    if (it == roles.end()) {
      throw Error(ErrorCode::ConfigError, "no backend bound for role '" +
                                              std::string(to_string(role)) + "'");
    }
    for (const auto& b : backends) {
      if (b.backend_id == it->second) return b;
    }
    throw Error(ErrorCode::ConfigError, "unknown backend '" + it->second + "'");
  }

  std::string hash() const { return sha256_hex(effective.dump()); }

  /// fixture path -> SHA-256, for every replay backend bound to a role.
  std::map<std::string, std::string> fixture_digests() const {
    std::map<std::string, std::string> out;
    for (const auto& [role, id] : roles) {
      const auto& b = backend_for(role);
      if (b.kind == BackendKind::Replay && b.fixture_path) {
        out[std::filesystem::path(*b.fixture_path).filename().string()] =
            file_sha256(*b.fixture_path);
      }
    }
    return out;
  }

  std::unique_ptr<Gateway> make_gateway() const {
    auto gw = std::make_unique<Gateway>(max_in_flight);
    std::map<std::string, std::shared_ptr<Backend>> built;
    for (const auto& [role, id] : roles) {
      const BackendSpec& spec = backend_for(role);
      auto& slot = built[spec.backend_id];
      if (!slot) slot = make_backend(spec);
      gw->bind(role, slot);
    }
    return gw;
  }

 private:
  std::shared_ptr<Backend> make_backend(const BackendSpec& spec) const {
    switch (spec.kind) {
      case BackendKind::Http:
        return std::make_shared<HttpBackend>(spec, auth_token);
      case BackendKind::Replay:
        return std::make_shared<ReplayBackend>(
            spec, read_jsonl<FixtureRow>(*spec.fixture_path, fixture_row_from_json));
      case BackendKind::Scripted:
        break;
    }
    throw Error(ErrorCode::ConfigError,
                "backend '" + spec.backend_id + "': scripted backends cannot come from a config file");
  }
};

namespace detail {

inline BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "http") return BackendKind::Http;
  if (s == "replay") return BackendKind::Replay;
  throw Error(ErrorCode::ConfigError, "unknown backend kind '" + s + "'");
}

inline DecodeParams params_from_json(const json& j) {
  DecodeParams p;
  p.temperature = j.value("temperature", p.temperature);
  p.max_tokens = j.value("max_tokens", p.max_tokens);
  p.timeout_ms = j.value("timeout_ms", p.timeout_ms);
  p.retries = j.value("retries", p.retries);
  if (p.temperature < 0 || p.max_tokens <= 0 || p.timeout_ms <= 0 || p.retries < 0) {
    throw Error(ErrorCode::ConfigError, "decode params out of range");
  }
  return p;
}

inline json to_json(const DecodeParams& p) {
  return {{"temperature", p.temperature},
          {"max_tokens", p.max_tokens},
          {"timeout_ms", p.timeout_ms},
          {"retries", p.retries}};
}

inline std::string env_role_name(Role r) {
  std::string s(to_string(r));
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return "SHH_BACKEND_" + s + "_URL";
}

inline NormalizationPolicy normalization_from_json(const json& j) {
  NormalizationPolicy p;
  p.lowercase = j.value("lowercase", p.lowercase);
  p.strip_punctuation = j.value("strip_punctuation", p.strip_punctuation);
  p.collapse_whitespace = j.value("collapse_whitespace", p.collapse_whitespace);
  p.apostrophe_to_space = j.value("apostrophe_to_space", p.apostrophe_to_space);
  for (const auto& r : j.value("replacements", json::array())) {
    if (!r.is_array() || r.size() != 2) {
      throw Error(ErrorCode::ConfigError, "replacements entries are [pattern, replacement]");
    }
    auto pattern = r[0].get<std::string>();
    try {
      std::regex check(pattern);
    } catch (const std::regex_error&) {
      throw Error(ErrorCode::ConfigError, "invalid replacement pattern '" + pattern + "'");
    }
    p.custom_replacements.emplace_back(std::move(pattern), r[1].get<std::string>());
  }
  return p;
}

inline json to_json(const NormalizationPolicy& p) {
  json reps = json::array();
  for (const auto& [a, b] : p.custom_replacements) reps.push_back({a, b});
  return {{"lowercase", p.lowercase},
          {"strip_punctuation", p.strip_punctuation},
          {"collapse_whitespace", p.collapse_whitespace},
          {"apostrophe_to_space", p.apostrophe_to_space},
          {"replacements", std::move(reps)}};
}

}  // namespace detail

/// "model", "oracle", "cascade_ger", or "fixed:<token>" / "fixed:internal".
inline ArbitrationPolicy policy_from_string(const std::string& s) {
  if (s.starts_with("fixed:")) {
    std::string tok = s.substr(6);
    if (!tok.starts_with("<")) tok = "<" + tok + ">";
    try {
      return ArbitrationPolicy::fixed(action_token_from_string(tok));
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, std::string("bad fixed policy: ") + e.message());
    }
  }
  ArbitrationPolicy p;
  p.kind = policy_kind_from_string(s);
  return p;
}

inline ArbitrationPolicy policy_from_json(const json& j) {
  if (j.is_string()) return policy_from_string(j.get<std::string>());
  ArbitrationPolicy p;
  p.kind = policy_kind_from_string(j.value("kind", std::string("model")));
  try {
    if (j.contains("fixed_token")) p.fixed_token = action_token_from_string(j["fixed_token"].get<std::string>());
    if (j.contains("fallback_token")) p.fallback_token = action_token_from_string(j["fallback_token"].get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.message());
  }
  p.separate_rewrite_call = j.value("separate_rewrite_call", false);
  p.validate();
  return p;
}

inline RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir,
                                  const EnvLookup& env = process_env) {
  RunConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");

    // Backends.
    json backends_out = json::array();
    for (const auto& b : j.value("backends", json::array())) {
      BackendSpec s;
      s.backend_id = b.at("backend_id").get<std::string>();
      s.kind = detail::backend_kind_from_string(b.at("kind").get<std::string>());
      if (b.contains("endpoint_url")) s.endpoint_url = b["endpoint_url"].get<std::string>();
      if (b.contains("fixture")) {
        std::filesystem::path p = b["fixture"].get<std::string>();
        s.fixture_path = (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
      }
      if (b.contains("model_id")) s.model_id = b["model_id"].get<std::string>();
      s.params = detail::params_from_json(b.value("params", json::object()));
      s.validate();
      if (s.kind == BackendKind::Http) parse_http_url(*s.endpoint_url);
      for (const auto& other : c.backends) {
        if (other.backend_id == s.backend_id) {
          throw Error(ErrorCode::ConfigError, "duplicate backend_id '" + s.backend_id + "'");
        }
      }
      json bj = {{"backend_id", s.backend_id},
                 {"kind", std::string(to_string(s.kind))},
                 {"params", detail::to_json(s.params)}};
      if (s.endpoint_url) bj["endpoint_url"] = *s.endpoint_url;
      if (b.contains("fixture")) bj["fixture"] = b["fixture"];
      if (s.model_id) bj["model_id"] = *s.model_id;
      backends_out.push_back(std::move(bj));
      c.backends.push_back(std::move(s));
    }

    // Role bindings, then environment overrides.
    const json roles_in = j.value("roles", json::object());
    for (const auto& [role_name, id] : roles_in.items()) {
      Role r;
      try {
        r = role_from_string(role_name);
      } catch (const Error&) {
        throw Error(ErrorCode::ConfigError, "unknown role '" + role_name + "'");
      }
      c.roles[r] = id.get<std::string>();
      c.backend_for(r);
    }
    for (Role r : kAllRoles) {
      auto url = env(detail::env_role_name(r));
      if (!url) continue;
      parse_http_url(*url);
      BackendSpec s;
      if (c.roles.contains(r)) s.params = c.backend_for(r).params;
      s.backend_id = std::string(to_string(r)) + "@env";
      s.kind = BackendKind::Http;
      s.endpoint_url = *url;
      if (c.roles.contains(r)) s.model_id = c.backend_for(r).model_id;
      backends_out.push_back({{"backend_id", s.backend_id},
                              {"kind", "http"},
                              {"endpoint_url", *url},
                              {"params", detail::to_json(s.params)}});
      c.backends.push_back(s);
      c.roles[r] = s.backend_id;
    }
    c.auth_token = env("SHH_AUTH_TOKEN");
    if (!c.roles.contains(Role::Internal) || !c.roles.contains(Role::External)) {
      throw Error(ErrorCode::ConfigError, "roles 'internal' and 'external' must be bound");
    }
    json roles_out = json::object();
    for (const auto& [r, id] : c.roles) roles_out[std::string(to_string(r))] = id;

    // Policy.
    c.policy = policy_from_json(j.value("policy", json("model")));

    // Seeds and k.
    const json seeds = j.value("seeds", json::object());
    if (seeds.contains("external")) {
      c.router.external_seeds = seeds["external"].get<std::vector<std::int64_t>>();
    } else if (j.contains("k")) {
      const auto k = j["k"].get<std::int64_t>();
      if (k < 1) throw Error(ErrorCode::ConfigError, "k must be >= 1");
      c.router.external_seeds.clear();
      for (std::int64_t s = 0; s < k; ++s) c.router.external_seeds.push_back(s);
    }
    if (j.contains("k") && j["k"].get<std::int64_t>() !=
                               static_cast<std::int64_t>(c.router.external_seeds.size())) {
      throw Error(ErrorCode::ConfigError, "k does not match the number of external seeds");
    }
    c.router.internal_seed = seeds.value("internal", std::int64_t{0});
    c.router.ger_seed = seeds.value("ger", std::int64_t{0});
    c.router.arbiter_seed = seeds.value("arbiter", std::int64_t{0});
    c.router.rewrite_seed = seeds.value("rewrite", std::int64_t{0});
    try {
      c.router.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.message());
    }

    const auto depth = j.value("max_tool_depth", std::int64_t{1});
    if (depth < 0) throw Error(ErrorCode::ConfigError, "max_tool_depth must be >= 0");
    c.router.max_tool_depth = static_cast<std::size_t>(depth);
    c.router.strict = j.value("strict", false);
    c.router.normalization = detail::normalization_from_json(j.value("normalization", json::object()));

    c.max_in_flight = j.value("max_in_flight", std::ptrdiff_t{64});
    if (c.max_in_flight < 1) throw Error(ErrorCode::ConfigError, "max_in_flight must be >= 1");
    const auto workers = j.value("workers", std::int64_t{1});
    if (workers < 1) throw Error(ErrorCode::ConfigError, "workers must be >= 1");
    c.workers = static_cast<std::size_t>(workers);

    // Tools: absent means the two mock tools.
    if (j.contains("tools")) {
      ToolRegistry reg;
      auto http_tool = std::make_shared<HttpTool>(c.auth_token);
      for (const auto& t : j["tools"]) {
        ToolSpec spec;
        spec.tool_name = t.at("name").get<std::string>();
        if (t.contains("endpoint_url")) spec.endpoint_url = t["endpoint_url"].get<std::string>();
        spec.passthrough = t.value("passthrough", false);
        spec.timeout_ms = t.value("timeout_ms", spec.timeout_ms);
        spec.description = t.value("description", std::string());
        if (spec.endpoint_url) parse_http_url(*spec.endpoint_url);
        try {
          if (spec.passthrough) {
            reg.add(spec, std::make_shared<PassthroughTool>());
          } else {
            reg.add(spec, http_tool);
          }
        } catch (const Error& e) {
          throw Error(ErrorCode::ConfigError, e.message());
        }
        c.tools_json.push_back(t);
      }
      c.router.tools = std::move(reg);
    } else {
      for (const auto& n : c.router.tools.names()) {
        c.tools_json.push_back({{"name", n}, {"passthrough", true}});
      }
    }

    // Optional template version pins.
    json versions = template_versions_json();
    const json pins = j.value("template_versions", json::object());
    for (const auto& [id, v] : pins.items()) {
      if (!versions.contains(id)) throw Error(ErrorCode::ConfigError, "unknown template '" + id + "'");
      if (versions[id] != v) {
        throw Error(ErrorCode::ConfigError, "template '" + id + "' is version " +
                                                versions[id].get<std::string>() + ", config pins " +
                                                v.dump());
      }
    }

    c.effective = {{"backends", std::move(backends_out)},
                   {"roles", std::move(roles_out)},
                   {"policy", c.policy.to_json()},
                   {"seeds", seeds_json(c.router)},
                   {"max_tool_depth", c.router.max_tool_depth},
                   {"strict", c.router.strict},
                   {"normalization", detail::to_json(c.router.normalization)},
                   {"tools", c.tools_json},
                   {"template_versions", std::move(versions)}};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path, const EnvLookup& env = process_env) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ConfigError, path + ": invalid JSON");
  try {
    return config_from_json(j, std::filesystem::path(path).parent_path(), env);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.message());
  }
}

}  // namespace shh
