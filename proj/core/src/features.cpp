#include "keydyn/features.hpp"

#include <algorithm>
#include <numeric>

#include "keydyn/detail/utf8.hpp"

namespace keydyn::features {

using events::Action;
using events::Device;
using events::RawEvent;
using events::Session;

namespace {

const std::vector<std::string> kBigrams = {"ст", "ен", "об", "но", "ни",
                                           "на", "па", "ко", "то", "ро"};
const std::vector<std::string> kTrigrams = {"ени", "ост", "ого", "ств", "ско",
                                            "ста", "ани", "про", "ест", "тор"};
const std::vector<std::string> kSpecialFeatures = {
    "backspace", "del", "capslock", "shift", "tab", "alt", "esc"};

// Report aliases as printed in the source tables (homoglyph transliteration).
const std::map<std::string, std::string>& gram_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"то", "to"}, {"ста", "cta"}, {"ани", "aни"}};
  return aliases;
}

// Down index -> matching up index for every kept pair of a normalized
// session, plus the runs of consecutive character downs.
struct SessionIndex {
  std::vector<std::ptrdiff_t> up_of_down;
  std::vector<std::vector<std::size_t>> char_runs;
};

SessionIndex build_index(const Session& session) {
  SessionIndex idx;
  const auto& ev = session.events;
  idx.up_of_down.assign(ev.size(), -1);

  std::map<std::string, std::size_t> pending;
  std::vector<std::size_t> run;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const RawEvent& e = ev[i];
    const bool is_char =
        e.device == Device::keyboard && events::is_character_code(e.code);
    if (!is_char) {
      if (!run.empty()) {
        idx.char_runs.push_back(std::move(run));
        run.clear();
      }
    } else if (e.action == Action::down) {
      run.push_back(i);
    }
    if (e.action == Action::down) {
      pending[e.code] = i;
    } else {
      auto it = pending.find(e.code);
      if (it != pending.end()) {
        idx.up_of_down[it->second] = static_cast<std::ptrdiff_t>(i);
        pending.erase(it);
      }
    }
  }
  if (!run.empty()) idx.char_runs.push_back(std::move(run));
  return idx;
}

double dwell_at(const Session& session, const SessionIndex& idx,
                std::size_t down) {
  const std::ptrdiff_t up = idx.up_of_down[down];
  return static_cast<double>(session.events[static_cast<std::size_t>(up)].t_ms -
                             session.events[down].t_ms);
}

PairTiming timing_at(const Session& session, const SessionIndex& idx,
                     std::size_t down1, std::size_t down2) {
  const auto& ev = session.events;
  const auto u1 = static_cast<std::size_t>(idx.up_of_down[down1]);
  const auto u2 = static_cast<std::size_t>(idx.up_of_down[down2]);
  PairTiming t;
  t.flight_ms = static_cast<double>(ev[down2].t_ms - ev[down1].t_ms);
  t.latency_ms = static_cast<double>(ev[u2].t_ms - ev[down1].t_ms);
  t.interval_ms = static_cast<double>(ev[down2].t_ms - ev[u1].t_ms);
  t.up_up_ms = static_cast<double>(ev[u2].t_ms - ev[u1].t_ms);
  return t;
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  return sum / static_cast<double>(values.size());
}

void require_duration(const Session& session) {
  if (session.duration_ms <= 0) {
    throw Error(ErrorCode::ZeroDuration,
                "session " + session.id + " has non-positive duration");
  }
}

}  // namespace

FeatureSchema::FeatureSchema(std::vector<FeatureInfo> features)
    : features_(std::move(features)) {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    index_.emplace(features_[i].name, i);
  }
}

bool FeatureSchema::contains(const std::string& name) const {
  return index_.count(name) > 0;
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error(ErrorCode::UnknownFeature, "feature not in schema: " + name);
  }
  return it->second;
}

std::string FeatureSchema::display_name(const std::string& name) const {
  for (const auto& [gram, alias] : gram_aliases()) {
    if (name.size() > gram.size() && name.compare(0, gram.size(), gram) == 0 &&
        name[gram.size()] == '_') {
      return alias + name.substr(gram.size());
    }
  }
  return name;
}

const std::vector<std::string>& bigram_list() { return kBigrams; }
const std::vector<std::string>& trigram_list() { return kTrigrams; }
const std::vector<std::string>& special_key_features() {
  return kSpecialFeatures;
}

FeatureSchema default_schema() {
  std::vector<FeatureInfo> f;
  f.push_back({"typing_speed", FeatureGroup::global, FeatureKind::frequency});
  for (const char* btn : {"mouse_left", "mouse_right"}) {
    f.push_back({std::string(btn) + "_dwell", FeatureGroup::mouse,
                 FeatureKind::time});
    f.push_back({std::string(btn) + "_freq", FeatureGroup::mouse,
                 FeatureKind::frequency});
  }
  for (const std::string& key : kSpecialFeatures) {
    f.push_back({key + "_dwell", FeatureGroup::special, FeatureKind::time});
    f.push_back({key + "_freq", FeatureGroup::special, FeatureKind::frequency});
  }
  for (const std::string& gram : kBigrams) {
    for (const char* suffix : {"dwell_first", "dwell_second", "flight",
                               "latency", "interval", "up_up"}) {
      f.push_back({gram + "_" + suffix, FeatureGroup::bigram,
                   FeatureKind::time});
    }
  }
  for (const std::string& gram : kTrigrams) {
    for (const char* suffix :
         {"dwell_first", "dwell_mid", "dwell_last", "flight_first",
          "flight_second", "latency_first", "latency_second", "interval_first",
          "interval_second", "up_up_first", "up_up_second"}) {
      f.push_back({gram + "_" + suffix, FeatureGroup::trigram,
                   FeatureKind::time});
    }
  }
  return FeatureSchema(std::move(f));
}

std::vector<double> dwell_times(const Session& session,
                                const std::string& code) {
  const SessionIndex idx = build_index(session);
  std::vector<double> out;
  for (std::size_t i = 0; i < session.events.size(); ++i) {
    const RawEvent& e = session.events[i];
    if (e.code == code && e.action == Action::down && idx.up_of_down[i] >= 0) {
      out.push_back(dwell_at(session, idx, i));
    }
  }
  return out;
}

std::vector<PairTiming> pair_timings(const Session& session,
                                     const std::string& first_code,
                                     const std::string& second_code) {
  const SessionIndex idx = build_index(session);
  const auto& ev = session.events;
  std::vector<PairTiming> out;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (!(ev[i].code == first_code && ev[i].action == Action::down)) continue;
    if (idx.up_of_down[i] < 0) continue;
    for (std::size_t j = i + 1; j < ev.size(); ++j) {
      if (ev[j].action != Action::down ||
          ev[j].device != Device::keyboard ||
          !events::is_character_code(ev[j].code)) {
        continue;
      }
      if (ev[j].code == second_code && idx.up_of_down[j] >= 0) {
        out.push_back(timing_at(session, idx, i, j));
      }
      break;  // only the next character-key down counts
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> ngram_occurrences(
    const Session& session, const std::string& gram) {
  const std::vector<std::string> chars = detail::utf8_chars(gram);
  const std::size_t n = chars.size();
  const SessionIndex idx = build_index(session);
  std::vector<std::vector<std::size_t>> out;
  for (const auto& run : idx.char_runs) {
    if (run.size() < n) continue;
    for (std::size_t start = 0; start + n <= run.size(); ++start) {
      bool match = true;
      for (std::size_t k = 0; k < n; ++k) {
        if (session.events[run[start + k]].code != chars[k]) {
          match = false;
          break;
        }
      }
      if (match) {
        out.emplace_back(run.begin() + static_cast<std::ptrdiff_t>(start),
                         run.begin() + static_cast<std::ptrdiff_t>(start + n));
      }
    }
  }
  return out;
}

double typing_speed(const Session& session) {
  require_duration(session);
  std::int64_t downs = 0;
  for (const RawEvent& e : session.events) {
    if (e.device == Device::keyboard && e.action == Action::down) ++downs;
  }
  return static_cast<double>(downs) * 60000.0 /
         static_cast<double>(session.duration_ms);
}

double press_frequency(const Session& session, const std::string& code) {
  require_duration(session);
  std::int64_t downs = 0;
  for (const RawEvent& e : session.events) {
    if (e.code == code && e.action == Action::down) ++downs;
  }
  return static_cast<double>(downs) * 60000.0 /
         static_cast<double>(session.duration_ms);
}

FeatureVector extract_features(const Session& session,
                               const FeatureSchema& schema) {
  require_duration(session);
  const SessionIndex idx = build_index(session);

  std::map<std::string, std::optional<double>> by_name;
  by_name["typing_speed"] = typing_speed(session);

  for (const char* button : {"mouse_left", "mouse_right"}) {
    const std::string code = button;
    by_name[code + "_dwell"] = mean_of(dwell_times(session, code));
    by_name[code + "_freq"] = press_frequency(session, code);
  }
  for (const std::string& key : kSpecialFeatures) {
    by_name[key + "_dwell"] = mean_of(dwell_times(session, key));
    by_name[key + "_freq"] = press_frequency(session, key);
  }

  for (const std::string& gram : kBigrams) {
    std::vector<double> dwell1, dwell2, flight, latency, interval, up_up;
    for (const auto& occ : ngram_occurrences(session, gram)) {
      const PairTiming t = timing_at(session, idx, occ[0], occ[1]);
      dwell1.push_back(dwell_at(session, idx, occ[0]));
      dwell2.push_back(dwell_at(session, idx, occ[1]));
      flight.push_back(t.flight_ms);
      latency.push_back(t.latency_ms);
      interval.push_back(t.interval_ms);
      up_up.push_back(t.up_up_ms);
    }
    by_name[gram + "_dwell_first"] = mean_of(dwell1);
    by_name[gram + "_dwell_second"] = mean_of(dwell2);
    by_name[gram + "_flight"] = mean_of(flight);
    by_name[gram + "_latency"] = mean_of(latency);
    by_name[gram + "_interval"] = mean_of(interval);
    by_name[gram + "_up_up"] = mean_of(up_up);
  }

  for (const std::string& gram : kTrigrams) {
    std::vector<double> d1, d2, d3;
    std::vector<double> fl1, fl2, la1, la2, iv1, iv2, uu1, uu2;
    for (const auto& occ : ngram_occurrences(session, gram)) {
      const PairTiming a = timing_at(session, idx, occ[0], occ[1]);
      const PairTiming b = timing_at(session, idx, occ[1], occ[2]);
      d1.push_back(dwell_at(session, idx, occ[0]));
      d2.push_back(dwell_at(session, idx, occ[1]));
      d3.push_back(dwell_at(session, idx, occ[2]));
      fl1.push_back(a.flight_ms);
      la1.push_back(a.latency_ms);
      iv1.push_back(a.interval_ms);
      uu1.push_back(a.up_up_ms);
      fl2.push_back(b.flight_ms);
      la2.push_back(b.latency_ms);
      iv2.push_back(b.interval_ms);
      uu2.push_back(b.up_up_ms);
    }
    by_name[gram + "_dwell_first"] = mean_of(d1);
    by_name[gram + "_dwell_mid"] = mean_of(d2);
    by_name[gram + "_dwell_last"] = mean_of(d3);
    by_name[gram + "_flight_first"] = mean_of(fl1);
    by_name[gram + "_flight_second"] = mean_of(fl2);
    by_name[gram + "_latency_first"] = mean_of(la1);
    by_name[gram + "_latency_second"] = mean_of(la2);
    by_name[gram + "_interval_first"] = mean_of(iv1);
    by_name[gram + "_interval_second"] = mean_of(iv2);
    by_name[gram + "_up_up_first"] = mean_of(uu1);
    by_name[gram + "_up_up_second"] = mean_of(uu2);
  }

  FeatureVector vec;
  vec.label = session.label;
  vec.values.reserve(schema.size());
  for (const FeatureInfo& info : schema.features()) {
    auto it = by_name.find(info.name);
    vec.values.push_back(it == by_name.end() ? std::nullopt : it->second);
  }
  return vec;
}

}  // namespace keydyn::features
