#pragma once

// Independent reference implementations and fixtures shared by the tests.
// The oracles here deliberately avoid the library's code paths.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "shh/backend_gateway.hpp"
#include "shh/types.hpp"

namespace shh_test {

// Minimum edit count by enumerating every edit script recursively. No table,
// no shared subproblems: exponential, so only for short sequences.
inline std::size_t brute_edit_min(const std::vector<std::string>& ref, std::size_t i,
                                  const std::vector<std::string>& hyp, std::size_t j) {
  if (i == ref.size()) return hyp.size() - j;
  if (j == hyp.size()) return ref.size() - i;
  const std::size_t diag = brute_edit_min(ref, i + 1, hyp, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
  const std::size_t del = brute_edit_min(ref, i + 1, hyp, j) + 1;
  const std::size_t ins = brute_edit_min(ref, i, hyp, j + 1) + 1;
  return std::min({diag, del, ins});
}

inline std::size_t brute_edit_min(const std::vector<std::string>& ref,
                                  const std::vector<std::string>& hyp) {
  return brute_edit_min(ref, 0, hyp, 0);
}

// Whitespace split after lowercasing and turning every non-alphanumeric ASCII
// character into a space. Matches the default policy on ASCII input.
inline std::vector<std::string> simple_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Every sequence of length <= max_len over the alphabet.
inline std::vector<std::vector<std::string>> all_sequences(const std::vector<std::string>& alphabet,
                                                           std::size_t max_len) {
  std::vector<std::vector<std::string>> out = {{}};
  std::size_t start = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t k = start; k < end; ++k) {
      if (out[k].size() != len - 1) continue;
      for (const auto& a : alphabet) {
        auto next = out[k];
        next.push_back(a);
        out.push_back(std::move(next));
      }
    }
    start = end;
  }
  return out;
}

// Labeling rules restated from scratch on raw integer edit counts.
inline std::string reference_asr_label(std::size_t e_int, std::size_t e_ext, std::size_t e_ger) {
  if (e_int == 0) return "<internal>";
  if (e_int <= e_ext && e_int <= e_ger) return "<internal>";
  if (e_ext <= e_ger) return "<external>";
  return "<rewrite>";
}

inline std::string reference_qa_label(const std::string& gold, const std::string& internal,
                                      const std::vector<std::string>& external) {
  if (internal == gold) return "<internal>";
  std::size_t hits = 0;
  for (const auto& e : external) hits += (e == gold);
  if (2 * hits > external.size()) return "<external>";
  return "<rewrite>";
}

inline shh::OptionSet abcd_options() {
  return {{"A", "Earthquake"}, {"B", "Thunderstorm"}, {"C", "Forest fire"}, {"D", "Snowstorm"}};
}

inline shh::Sample asr_sample(std::string id, std::string gold, std::string dataset = "ds") {
  shh::Sample s;
  s.sample_id = std::move(id);
  s.dataset_id = std::move(dataset);
  s.task = shh::Task::Asr;
  s.audio_ref = "audio/" + s.sample_id + ".wav";
  s.gold_transcript = std::move(gold);
  return s;
}

inline shh::Sample qa_sample(std::string id, std::string gold_letter, std::string dataset = "qa") {
  shh::Sample s;
  s.sample_id = std::move(id);
  s.dataset_id = std::move(dataset);
  s.task = shh::Task::Qa;
  s.audio_ref = "audio/" + s.sample_id + ".wav";
  s.question = "Based on the audio, which natural phenomenon could be occurring?";
  s.options = abcd_options();
  s.gold_choice = std::move(gold_letter);
  return s;
}

// Scripted backend driven by a (sample_id|audio_ref, role, seed) -> text table.
// Missing entries raise FixtureMiss like a replay backend.
struct Table {
  std::map<std::tuple<std::string, shh::Role, std::int64_t>, std::string> rows;
  void set(const std::string& key, shh::Role role, std::int64_t seed, std::string text) {
    rows[{key, role, seed}] = std::move(text);
  }
};

inline std::shared_ptr<shh::Backend> table_backend(std::shared_ptr<Table> table,
                                                   std::string id = "scripted") {
  shh::BackendSpec spec;
  spec.backend_id = std::move(id);
  return std::make_shared<shh::ScriptedBackend>(spec, [table](const shh::GenerationRequest& r) {
    const auto seed = r.seed.value_or(0);
    if (auto it = table->rows.find({r.audio_ref, r.role, seed}); it != table->rows.end()) {
      return it->second;
    }
    if (auto it = table->rows.find({r.sample_id, r.role, seed}); it != table->rows.end()) {
      return it->second;
    }
    throw shh::Error(shh::ErrorCode::FixtureMiss, "no row for " + r.sample_id);
  });
}

inline void bind_all(shh::Gateway& gw, const std::shared_ptr<shh::Backend>& b) {
  for (auto r : shh::kAllRoles) gw.bind(r, b);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("shh_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace shh_test
