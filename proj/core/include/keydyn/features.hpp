#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "keydyn/events.hpp"

namespace keydyn::features {

// Timing measures for an ordered pair of key presses. With d = down time,
// u = up time of the first (1) and second (2) key:
//   flight = d2 - d1, latency = u2 - d1, interval = d2 - u1, up_up = u2 - u1.
// interval goes negative under rollover; flight > 0 for distinct presses.
struct PairTiming {
  double flight_ms = 0;
  double latency_ms = 0;
  double interval_ms = 0;
  double up_up_ms = 0;
};

enum class FeatureGroup { global, mouse, special, bigram, trigram };
enum class FeatureKind { time, frequency };

struct FeatureInfo {
  std::string name;
  FeatureGroup group;
  FeatureKind kind;
};

// The fixed, ordered feature dimensions. Any matrix serialized with this
// schema carries the same order.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureInfo> features);

  const std::vector<FeatureInfo>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  const FeatureInfo& at(std::size_t i) const { return features_[i]; }

  bool contains(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  // throws UnknownFeature

  // Latin-transliterated alias as printed in reports ("то_interval" ->
  // "to_interval"); identity where no alias is defined.
  std::string display_name(const std::string& name) const;

 private:
  std::vector<FeatureInfo> features_;
  std::map<std::string, std::size_t> index_;
};

// One session's feature values aligned to a schema; absent means the
// key/n-gram never occurred in the session.
struct FeatureVector {
  std::vector<std::optional<double>> values;
  events::Label label = events::Label::unlabeled;

  const std::optional<double>& operator[](std::size_t i) const {
    return values[i];
  }
};

const std::vector<std::string>& bigram_list();   // the ten timed bigrams
const std::vector<std::string>& trigram_list();  // the ten timed trigrams
const std::vector<std::string>& special_key_features();  // keys with dwell+freq

// Groups: typing speed; left/right mouse click dwell + frequency; seven
// special keys dwell + frequency; six timing measures per bigram; three
// dwells plus two adjacent-pair timing sets per trigram. 189 dimensions.
FeatureSchema default_schema();

// Milliseconds between each matched press/release of `code`, in event order.
std::vector<double> dwell_times(const events::Session& session,
                                const std::string& code);

// One PairTiming per occurrence where a down of `second_code` is the next
// character-key down after a down of `first_code`.
std::vector<PairTiming> pair_timings(const events::Session& session,
                                     const std::string& first_code,
                                     const std::string& second_code);

// Occurrences of a 2- or 3-character gram as consecutive character-key
// downs. Any special-key or mouse event between the downs breaks the run;
// character releases do not. Overlapping windows all count. Returns the
// event indices of the downs.
std::vector<std::vector<std::size_t>> ngram_occurrences(
    const events::Session& session, const std::string& gram);

// Keyboard downs per minute. Throws ZeroDuration.
double typing_speed(const events::Session& session);

// Downs of `code` per minute. Throws ZeroDuration.
double press_frequency(const events::Session& session,
                       const std::string& code);

// Per-session vector: every time feature is the mean over its occurrences
// (absent when there are none); frequency features are always present.
FeatureVector extract_features(const events::Session& session,
                               const FeatureSchema& schema);

}  // namespace keydyn::features
