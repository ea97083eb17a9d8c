#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "shh/error.hpp"

namespace shh {

enum class ActionKind { Internal, External, Rewrite, Tool };

/// The leading control token of an arbiter response. `tool_name` is non-empty
/// exactly when kind == Tool.
class ActionToken {
 public:
  static ActionToken internal() { return ActionToken(ActionKind::Internal); }
  static ActionToken external() { return ActionToken(ActionKind::External); }
  static ActionToken rewrite() { return ActionToken(ActionKind::Rewrite); }
  static ActionToken tool(std::string name);

  ActionKind kind() const { return kind_; }
  const std::string& tool_name() const { return tool_name_; }
  bool is_tool() const { return kind_ == ActionKind::Tool; }

  /// "<internal>", "<external>", "<rewrite>" or "<tool:NAME>".
  std::string render() const {
    switch (kind_) {
      case ActionKind::Internal: return "<internal>";
      case ActionKind::External: return "<external>";
      case ActionKind::Rewrite: return "<rewrite>";
      case ActionKind::Tool: return "<tool:" + tool_name_ + ">";
    }
    return {};
  }

  bool operator==(const ActionToken&) const = default;
  auto operator<=>(const ActionToken&) const = default;

 private:
  explicit ActionToken(ActionKind kind, std::string tool_name = {})
      : kind_(kind), tool_name_(std::move(tool_name)) {}

  ActionKind kind_;
  std::string tool_name_;
};

inline bool is_tool_identifier(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

inline ActionToken ActionToken::tool(std::string name) {
  if (!is_tool_identifier(name)) {
    throw Error(ErrorCode::InvalidArgument,
                "invalid tool name '" + name + "'");
  }
  return ActionToken(ActionKind::Tool, std::move(name));
}

/// Parses an exact canonical surface form; std::nullopt otherwise.
inline std::optional<ActionToken> parse_action_token(std::string_view s) {
  if (s == "<internal>") return ActionToken::internal();
  if (s == "<external>") return ActionToken::external();
  if (s == "<rewrite>") return ActionToken::rewrite();
  constexpr std::string_view prefix = "<tool:";
  if (s.size() > prefix.size() + 1 && s.starts_with(prefix) &&
      s.back() == '>') {
    const auto name = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    if (is_tool_identifier(name)) return ActionToken::tool(std::string(name));
  }
  return std::nullopt;
}

/// Throwing variant for configuration values and persisted files.
inline ActionToken action_token_from_string(std::string_view s) {
  auto token = parse_action_token(s);
  if (!token) {
    throw Error(ErrorCode::SchemaError,
                "not an action token: '" + std::string(s) + "'");
  }
  return *token;
}

}  // namespace shh
