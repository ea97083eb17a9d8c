#pragma once

// Core records shared by labeling, routing and evaluation, with their JSON
// mappings. JSON objects use nlohmann::json's sorted keys, so serialized
// bytes are deterministic.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "shh/action_token.hpp"
#include "shh/error.hpp"

namespace shh {

using json = nlohmann::json;

enum class Task { Asr, Qa };

inline std::string_view to_string(Task t) { return t == Task::Asr ? "asr" : "qa"; }

inline Task task_from_string(std::string_view s) {
  if (s == "asr") return Task::Asr;
  if (s == "qa") return Task::Qa;
  throw Error(ErrorCode::SchemaError, "unknown task '" + std::string(s) + "'");
}

struct OptionItem {
  std::string letter;
  std::string text;
  bool operator==(const OptionItem&) const = default;
};

using OptionSet = std::vector<OptionItem>;

/// A resolved answer: the option label plus its text.
struct ChoiceId {
  std::string letter;
  std::string option_text;

  std::string render() const { return letter + ". " + option_text; }
  bool operator==(const ChoiceId&) const = default;
};

inline const OptionItem* find_option(const OptionSet& options,
                                     std::string_view letter) {
  for (const auto& o : options) {
    if (o.letter == letter) return &o;
  }
  return nullptr;
}

struct Sample {
  std::string sample_id;
  std::string dataset_id;
  Task task = Task::Asr;
  std::string audio_ref;
  std::optional<std::string> gold_transcript;
  std::optional<std::string> question;
  OptionSet options;
  std::optional<std::string> gold_choice;
  // Free-form hints such as a declared sample rate.
  std::map<std::string, std::string> metadata;

  void validate() const {
    if (sample_id.empty()) {
      throw Error(ErrorCode::SchemaError, "sample_id is empty");
    }
    if (task == Task::Asr && !gold_transcript) {
      throw Error(ErrorCode::SchemaError,
                  "asr sample '" + sample_id + "' lacks gold_transcript");
    }
    if (task == Task::Qa) {
      if (!question || options.empty() || !gold_choice) {
        throw Error(ErrorCode::SchemaError,
                    "qa sample '" + sample_id +
                        "' needs question, options and gold_choice");
      }
      if (!find_option(options, *gold_choice)) {
        throw Error(ErrorCode::SchemaError,
                    "qa sample '" + sample_id + "' gold_choice '" +
                        *gold_choice + "' is not an option");
      }
    }
  }

  ChoiceId gold_choice_id() const {
    const auto* o = gold_choice ? find_option(options, *gold_choice) : nullptr;
    if (!o) throw Error(ErrorCode::MissingGold, "sample '" + sample_id + "'");
    return {o->letter, o->text};
  }

  // Options rendered on one line: "A. Earthquake B. Thunderstorm ...".
  std::string options_line() const {
    std::string out;
    for (const auto& o : options) {
      if (!out.empty()) out += ' ';
      out += o.letter + ". " + o.text;
    }
    return out;
  }
};

struct HypothesisMeta {
  std::string role;
  std::size_t index = 0;
  std::string backend_id;
  std::int64_t seed = 0;
  double temperature = 0.0;
  bool operator==(const HypothesisMeta&) const = default;
};

/// First-pass candidates for one sample. `internal` is empty when the
/// internal backend failed (degraded mode); index 0 of `external_nbest` is
/// the designated top-1.
struct HypothesisSet {
  std::optional<std::string> internal;
  std::vector<std::string> external_nbest;
  std::optional<std::string> ger;
  std::vector<HypothesisMeta> meta;

  bool operator==(const HypothesisSet&) const = default;

  const std::string& external_top1() const {
    if (external_nbest.empty()) {
      throw Error(ErrorCode::MissingHypothesis, "no external hypothesis");
    }
    return external_nbest.front();
  }
};

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

inline const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw Error(ErrorCode::SchemaError, std::string("missing field '") + key + "'");
  }
  return *it;
}

inline std::string require_string(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) {
    throw Error(ErrorCode::SchemaError, std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::SchemaError, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace detail

inline json to_json(const OptionSet& options) {
  json j = json::object();
  for (const auto& o : options) j[o.letter] = o.text;
  return j;
}

inline OptionSet options_from_json(const json& j) {
  OptionSet out;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (!v.is_string()) throw Error(ErrorCode::SchemaError, "option text must be a string");
      out.push_back({k, v.get<std::string>()});
    }
  } else if (j.is_array()) {
    for (const auto& item : j) {
      out.push_back({detail::require_string(item, "letter"),
                     detail::require_string(item, "text")});
    }
  } else {
    throw Error(ErrorCode::SchemaError, "options must be an object or array");
  }
  return out;
}

inline json to_json(const Sample& s) {
  json j = {{"sample_id", s.sample_id},
            {"dataset_id", s.dataset_id},
            {"task", std::string(to_string(s.task))},
            {"audio_ref", s.audio_ref}};
  if (s.gold_transcript) j["gold_transcript"] = *s.gold_transcript;
  if (s.question) j["question"] = *s.question;
  if (!s.options.empty()) j["options"] = to_json(s.options);
  if (s.gold_choice) j["gold_choice"] = *s.gold_choice;
  if (!s.metadata.empty()) j["metadata"] = s.metadata;
  return j;
}

inline Sample sample_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "sample must be an object");
  Sample s;
  s.sample_id = detail::require_string(j, "sample_id");
  s.dataset_id = detail::optional_string(j, "dataset_id").value_or("default");
  s.task = task_from_string(detail::require_string(j, "task"));
  s.audio_ref = detail::require_string(j, "audio_ref");
  s.gold_transcript = detail::optional_string(j, "gold_transcript");
  s.question = detail::optional_string(j, "question");
  if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
    s.options = options_from_json(*it);
  }
  s.gold_choice = detail::optional_string(j, "gold_choice");
  if (auto it = j.find("metadata"); it != j.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      s.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  s.validate();
  return s;
}

inline json to_json(const HypothesisMeta& m) {
  return {{"role", m.role},
          {"index", m.index},
          {"backend_id", m.backend_id},
          {"seed", m.seed},
          {"temperature", m.temperature}};
}

inline json to_json(const HypothesisSet& h) {
  json j = {{"internal", h.internal ? json(*h.internal) : json(nullptr)},
            {"external_nbest", h.external_nbest}};
  if (h.ger) j["ger"] = *h.ger;
  json meta = json::array();
  for (const auto& m : h.meta) meta.push_back(to_json(m));
  j["meta"] = std::move(meta);
  return j;
}

inline HypothesisSet hypotheses_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "hypotheses must be an object");
  HypothesisSet h;
  h.internal = detail::optional_string(j, "internal");
  const auto& ext = detail::require(j, "external_nbest");
  if (!ext.is_array()) throw Error(ErrorCode::SchemaError, "external_nbest must be an array");
  for (const auto& e : ext) {
    if (!e.is_string()) throw Error(ErrorCode::SchemaError, "external hypothesis must be a string");
    h.external_nbest.push_back(e.get<std::string>());
  }
  h.ger = detail::optional_string(j, "ger");
  if (auto it = j.find("meta"); it != j.end() && it->is_array()) {
    for (const auto& m : *it) {
      HypothesisMeta hm;
      hm.role = detail::require_string(m, "role");
      hm.index = m.value("index", std::size_t{0});
      hm.backend_id = m.value("backend_id", std::string());
      hm.seed = m.value("seed", std::int64_t{0});
      hm.temperature = m.value("temperature", 0.0);
      h.meta.push_back(std::move(hm));
    }
  }
  return h;
}

}  // namespace shh
