#pragma once

// Corpus-level label construction: decode every sample with the configured
// backends, then apply the oracle labeling rules.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shh/backend_gateway.hpp"
#include "shh/label_builder.hpp"
#include "shh/parallel.hpp"
#include "shh/router.hpp"

namespace shh {

struct LabelRun {
  std::vector<LabeledExample> examples;
  std::vector<SampleFailure> failures;
  std::map<std::string, std::size_t> token_counts;
};

inline std::map<std::string, std::size_t> empty_token_counts() {
  return {{ActionToken::internal().render(), 0},
          {ActionToken::external().render(), 0},
          {ActionToken::rewrite().render(), 0}};
}

/// Labels need complete hypotheses, so any failed decode moves the sample to
/// `failures` instead of producing a partial example. Output keeps input
/// order for any worker count.
inline LabelRun build_labeled_dataset(std::span<const Sample> samples, const Gateway& gateway,
                                      const RouterConfig& config, std::size_t workers = 1) {
  config.validate();
  for (Role r : {Role::Internal, Role::External}) gateway.backend(r);
  for (const auto& s : samples) {
    if (s.task == Task::Asr) {
      gateway.backend(Role::Ger);
      break;
    }
  }

  std::vector<std::optional<LabeledExample>> examples(samples.size());
  std::vector<std::optional<SampleFailure>> failures(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const Sample& s = samples[i];
    RoutingTrace scratch;
    try {
      auto hyps = first_pass(s, gateway, config, s.audio_ref, true, scratch);
      if (!scratch.errors.empty()) {
        const auto& e = scratch.errors.front();
        failures[i] = SampleFailure{s.sample_id, s.dataset_id, e.stage, e.code, e.message};
        return;
      }
      examples[i] = make_labeled_example(s, std::move(hyps), config.normalization);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError ||
          (config.strict && e.code() == ErrorCode::FixtureMiss)) {
        throw;
      }
      failures[i] = SampleFailure{s.sample_id, s.dataset_id, "label", e.code(), e.message()};
    }
  });

  LabelRun run;
  run.token_counts = empty_token_counts();
  for (auto& ex : examples) {
    if (!ex) continue;
    ++run.token_counts[ex->oracle_token.render()];
    run.examples.push_back(std::move(*ex));
  }
  for (auto& f : failures) {
    if (f) run.failures.push_back(std::move(*f));
  }
  return run;
}

}  // namespace shh
