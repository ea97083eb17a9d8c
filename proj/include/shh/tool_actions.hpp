#pragma once

// Audio-enhancement tools the arbiter can invoke with <tool:NAME>. A tool
// maps an audio reference to a new audio reference; the harness never opens
// audio itself.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shh/action_token.hpp"
#include "shh/error.hpp"

namespace shh {

struct ToolSpec {
  std::string tool_name;
  std::optional<std::string> endpoint_url;
  bool passthrough = false;  // mock: derive the new ref by suffix tagging
  int timeout_ms = 30000;
  std::string description;

  void validate() const {
    if (!is_tool_identifier(tool_name)) {
      throw Error(ErrorCode::ConfigError, "invalid tool name '" + tool_name + "'");
    }
    if (passthrough == endpoint_url.has_value()) {
      throw Error(ErrorCode::ConfigError,
                  "tool '" + tool_name + "' needs exactly one of endpoint_url or passthrough");
    }
  }

  ActionToken token() const { return ActionToken::tool(tool_name); }
};

class ToolInvoker {
 public:
  virtual ~ToolInvoker() = default;
  /// Throws ToolTimeout or ToolFailure.
  virtual std::string apply(const ToolSpec& tool, const std::string& audio_ref) = 0;
};

/// "s1.wav" -> "s1.bnr.wav"; "clip" -> "clip.bnr".
inline std::string tag_audio_ref(const std::string& audio_ref, const std::string& tag) {
  const auto slash = audio_ref.find_last_of('/');
  const auto dot = audio_ref.find_last_of('.');
  const bool has_ext = dot != std::string::npos && dot > 0 &&
                       (slash == std::string::npos || dot > slash + 1);
  if (!has_ext) return audio_ref + "." + tag;
  return audio_ref.substr(0, dot) + "." + tag + audio_ref.substr(dot);
}

class PassthroughTool final : public ToolInvoker {
 public:
  std::string apply(const ToolSpec& tool, const std::string& audio_ref) override {
    return tag_audio_ref(audio_ref, tool.tool_name);
  }
};

struct RegisteredTool {
  ToolSpec spec;
  std::shared_ptr<ToolInvoker> invoker;
};

/// Name-keyed registry, read-only once configuration is done.
class ToolRegistry {
 public:
  void add(ToolSpec spec, std::shared_ptr<ToolInvoker> invoker) {
    spec.validate();
    if (!invoker) throw Error(ErrorCode::ConfigError, "tool '" + spec.tool_name + "' has no invoker");
    const std::string name = spec.tool_name;
    if (!tools_.emplace(name, RegisteredTool{std::move(spec), std::move(invoker)}).second) {
      throw Error(ErrorCode::DuplicateTool, "tool '" + name + "' is already registered");
    }
    names_.push_back(name);
  }

  void add_passthrough(const std::string& name, std::string description = {}) {
    add(ToolSpec{name, std::nullopt, true, 0, std::move(description)},
        std::make_shared<PassthroughTool>());
  }

  bool contains(const std::string& name) const { return tools_.contains(name); }

  const RegisteredTool& get(const std::string& name) const {
    auto it = tools_.find(name);
    if (it == tools_.end()) {
      throw Error(ErrorCode::UnknownTool, "tool '" + name + "' is not registered");
    }
    return it->second;
  }

  /// Registration order.
  const std::vector<std::string>& names() const { return names_; }
  bool empty() const { return tools_.empty(); }

  /// Mock bnr and studio tools.
  static ToolRegistry with_default_mocks() {
    ToolRegistry r;
    r.add_passthrough("bnr", "background noise removal");
    r.add_passthrough("studio", "studio voice restoration");
    return r;
  }

 private:
  std::map<std::string, RegisteredTool> tools_;
  std::vector<std::string> names_;
};

/// Returns the enhanced audio reference; the input reference is untouched.
inline std::string apply_tool(const RegisteredTool& tool, const std::string& audio_ref) {
  try {
    return tool.invoker->apply(tool.spec, audio_ref);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ToolTimeout || e.code() == ErrorCode::ToolFailure) throw;
    throw Error(ErrorCode::ToolFailure, tool.spec.tool_name + ": " + e.message());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ToolFailure, tool.spec.tool_name + ": " + e.what());
  }
}

inline std::string apply_tool(const ToolRegistry& registry, const std::string& name,
                              const std::string& audio_ref) {
  return apply_tool(registry.get(name), audio_ref);
}

}  // namespace shh
