#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "keydyn/events.hpp"

namespace keydyn::synthgen {

// Timing model for one synthetic typist. Dwells and inter-key gaps are
// log-normal (parameterized by mean, not median); p_roll is the chance a
// key goes down before the previous one is released (negative interval).
struct TypistProfile {
  double dwell_mean_ms = 85.0;
  double dwell_sigma = 0.35;
  double interval_mean_ms = 120.0;
  double interval_sigma = 0.5;
  double p_roll = 0.08;
  std::map<std::string, double> special_key_rates;  // presses per minute
  double left_click_rate = 6.0;   // per minute
  double right_click_rate = 0.0;  // per minute
  // Stress contrast: every time draw is divided by `speedup` and the
  // special-key rates are multiplied by `stress_error_factor`.
  double speedup = 1.5;
  double stress_error_factor = 1.0;
};

TypistProfile default_profile();
void validate_profile(const TypistProfile& profile);  // throws InvalidProfile

// Fixed word list; every tracked bigram and trigram occurs in some word.
const std::vector<std::string>& word_corpus();

// Types whole-corpus epochs in shuffled order until `target_keys` key-downs
// have been emitted. Specials and clicks are injected at word boundaries so
// they never interrupt an n-gram inside a word.
events::Session generate_session(const TypistProfile& profile, bool is_stress,
                                 int target_keys, std::uint64_t seed,
                                 const std::string& id = "");

struct DatasetConfig {
  int n_normal = 50;
  int n_stress = 50;
  double separation = 1.5;  // stress speedup; 1.0 makes the classes identical
  int participants = 8;
  double participant_sigma = 0.03;  // log-space spread of per-typist jitter
  int target_keys = 500;
  TypistProfile base;  // defaulted to default_profile() when rates are empty
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  std::vector<events::Session> sessions;  // normals first, then stress
  std::string manifest_json;              // full parameterization
};

// Participant variation: each of `participants` typists gets one jittered
// copy of the base profile (log-space participant_sigma) reused for all
// their sessions in both classes.
SyntheticDataset generate_dataset(const DatasetConfig& config);

}  // namespace keydyn::synthgen
