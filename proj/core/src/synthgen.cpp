#include "keydyn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "keydyn/detail/utf8.hpp"
#include "keydyn/errors.hpp"
#include "keydyn/rng.hpp"

namespace keydyn::synthgen {

using events::Action;
using events::Device;
using events::Label;
using events::RawEvent;
using events::Session;
using json = nlohmann::json;

namespace {

// Injection order must be stable so identical seeds replay identically.
const std::vector<std::string> kSpecialOrder = {
    "backspace", "del", "capslock", "shift", "tab", "alt", "esc"};

const std::vector<std::string> kWords = {
    // words carrying the tracked bigrams and trigrams
    "стол", "станция", "знание", "осень", "ученик", "общество",
    "острова", "много", "ничего", "народ", "папа", "копейка",
    "только", "дорога", "скоро", "стать", "проект", "история",
    "место", "осторожно", "государство", "единение", "весенний",
    "паста", "простор", "восток", "минута", "пространство",
    // ordinary filler
    "работа", "жизнь", "время", "человек", "слово", "дело", "вода",
    "город", "окно", "лес", "мир", "свет", "ночь", "утро", "хлеб",
    "книга", "письмо", "экран", "буква", "мышь", "рука", "год",
    "день", "дом", "это", "как", "что", "так"};

}  // namespace

const std::vector<std::string>& word_corpus() { return kWords; }

TypistProfile default_profile() {
  TypistProfile p;
  p.special_key_rates = {{"backspace", 4.0}, {"del", 0.6}, {"capslock", 0.0},
                         {"shift", 10.0},    {"tab", 0.8}, {"alt", 0.0},
                         {"esc", 0.0}};
  return p;
}

void validate_profile(const TypistProfile& p) {
  const auto bad = [](const std::string& what) -> Error {
    return Error(ErrorCode::InvalidProfile, "invalid profile: " + what);
  };
  if (!(p.dwell_mean_ms > 0.0) || !(p.interval_mean_ms > 0.0))
    throw bad("timing means must be positive");
  if (!(p.dwell_sigma > 0.0) || !(p.interval_sigma > 0.0))
    throw bad("timing sigmas must be positive");
  if (p.p_roll < 0.0 || p.p_roll >= 0.5)
    throw bad("p_roll must lie in [0, 0.5)");
  if (!(p.speedup > 0.0)) throw bad("speedup must be positive");
  if (!(p.stress_error_factor > 0.0))
    throw bad("stress_error_factor must be positive");
  if (p.left_click_rate < 0.0 || p.right_click_rate < 0.0)
    throw bad("click rates must be non-negative");
  for (const auto& [key, rate] : p.special_key_rates) {
    if (!events::is_special_key(key)) throw bad("unknown special '" + key + "'");
    if (rate < 0.0) throw bad("negative rate for '" + key + "'");
  }
}

namespace {

struct EventWriter {
  std::vector<RawEvent> events;
  std::map<std::string, double> held_until;  // per keyboard code
  double cursor = 0.0;     // typing frontier: max up time so far
  double last_down = 0.0;
  std::size_t key_downs = 0;

  static std::int64_t ms(double t) {
    return static_cast<std::int64_t>(std::llround(t));
  }

  void press(Device device, const std::string& code, double down, double up) {
    events.push_back({ms(down), device, code, Action::down});
    events.push_back({ms(up), device, code, Action::up});
    if (device == Device::keyboard) {
      ++key_downs;
      held_until[code] = up;
    }
    cursor = std::max(cursor, up);
    last_down = std::max(last_down, down);
  }
};

}  // namespace

Session generate_session(const TypistProfile& profile, bool is_stress,
                         int target_keys, std::uint64_t seed,
                         const std::string& id) {
  validate_profile(profile);
  if (target_keys < 20)
    throw Error(ErrorCode::InvalidConfig, "target_keys must be >= 20");

  const double divisor = is_stress ? profile.speedup : 1.0;
  const double rate_factor = is_stress ? profile.stress_error_factor : 1.0;

  Rng rng(seed);
  EventWriter w;
  const auto draw_dwell = [&] {
    return rng.lognormal_mean(profile.dwell_mean_ms, profile.dwell_sigma) /
           divisor;
  };
  const auto draw_gap = [&] {
    return rng.lognormal_mean(profile.interval_mean_ms,
                              profile.interval_sigma) /
           divisor;
  };

  bool first_key = true;
  std::string prev_char;
  double prev_dwell = 0.0;

  const auto type_key = [&](const std::string& code, bool allow_roll) {
    const double dwell = draw_dwell();
    double down = 0.0;
    if (first_key) {
      first_key = false;
    } else {
      // Rollover presses the next key before the previous one is released,
      // but never while the same key is still held (that would read as
      // auto-repeat) and never for a repeated character.
      bool rolled = false;
      if (allow_roll && code != prev_char && rng.bernoulli(profile.p_roll)) {
        const double f = rng.uniform(0.3, 0.9);
        const double candidate = w.cursor - f * prev_dwell;
        const auto held = w.held_until.find(code);
        if (candidate > w.last_down &&
            (held == w.held_until.end() || candidate > held->second)) {
          down = candidate;
          rolled = true;
        }
      }
      if (!rolled) down = w.cursor + draw_gap();
    }
    w.press(Device::keyboard, code, down, down + dwell);
    prev_char = code;
    prev_dwell = dwell;
  };

  // Word-boundary noise: specials and clicks fire with probability
  // rate * elapsed-word-minutes, emitted as a plain press-release.
  const auto inject_noise = [&](double word_minutes) {
    for (const std::string& key : kSpecialOrder) {
      const auto it = profile.special_key_rates.find(key);
      const double rate =
          (it == profile.special_key_rates.end() ? 0.0 : it->second) *
          rate_factor;
      if (rate <= 0.0 || !rng.bernoulli(std::min(1.0, rate * word_minutes)))
        continue;
      const double down = w.cursor + draw_gap();
      w.press(Device::keyboard, key, down, down + draw_dwell());
      prev_char = key;  // a special always breaks the rollover chain
    }
    const std::pair<const char*, double> clicks[] = {
        {"mouse_left", profile.left_click_rate * rate_factor},
        {"mouse_right", profile.right_click_rate * rate_factor}};
    for (const auto& [code, rate] : clicks) {
      if (rate <= 0.0 || !rng.bernoulli(std::min(1.0, rate * word_minutes)))
        continue;
      const double down = w.cursor + draw_gap();
      w.press(Device::mouse, code, down, down + draw_dwell());
    }
  };

  std::vector<std::string> epoch = kWords;
  std::size_t word_pos = epoch.size();  // forces an initial shuffle
  while (w.key_downs < static_cast<std::size_t>(target_keys)) {
    if (word_pos == epoch.size()) {
      rng.shuffle(epoch);
      word_pos = 0;
    }
    const std::string& word = epoch[word_pos++];
    const double word_start = w.cursor;
    bool first_in_word = true;
    for (const std::string& ch : detail::utf8_chars(word)) {
      type_key(ch, !first_in_word);
      first_in_word = false;
    }
    type_key("space", false);
    inject_noise((w.cursor - word_start) / 60000.0);
  }

  Session s;
  s.id = id.empty() ? "synth-" + std::to_string(seed) : id;
  s.label = is_stress ? Label::stress : Label::normal;
  s.events = std::move(w.events);
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const RawEvent& a, const RawEvent& b) {
                     return a.t_ms < b.t_ms;
                   });
  s.duration_ms = s.events.back().t_ms - s.events.front().t_ms;
  return s;
}

namespace {

TypistProfile jitter_profile(const TypistProfile& base, double sigma,
                             Rng& rng) {
  TypistProfile p = base;
  const auto wiggle = [&] { return std::exp(sigma * rng.normal()); };
  p.dwell_mean_ms *= wiggle();
  p.interval_mean_ms *= wiggle();
  for (const std::string& key : kSpecialOrder) {
    const auto it = p.special_key_rates.find(key);
    if (it != p.special_key_rates.end()) it->second *= wiggle();
  }
  p.left_click_rate *= wiggle();
  p.right_click_rate *= wiggle();
  return p;
}

json profile_to_json(const TypistProfile& p) {
  json j;
  j["dwell_mean_ms"] = p.dwell_mean_ms;
  j["dwell_sigma"] = p.dwell_sigma;
  j["interval_mean_ms"] = p.interval_mean_ms;
  j["interval_sigma"] = p.interval_sigma;
  j["p_roll"] = p.p_roll;
  j["special_key_rates"] = p.special_key_rates;
  j["left_click_rate"] = p.left_click_rate;
  j["right_click_rate"] = p.right_click_rate;
  j["speedup"] = p.speedup;
  j["stress_error_factor"] = p.stress_error_factor;
  return j;
}

}  // namespace

SyntheticDataset generate_dataset(const DatasetConfig& config) {
  if (config.n_normal < 1 || config.n_stress < 1)
    throw Error(ErrorCode::InvalidConfig, "session counts must be >= 1");
  if (config.separation < 1.0)
    throw Error(ErrorCode::InvalidConfig, "separation must be >= 1.0");
  if (config.participants < 1)
    throw Error(ErrorCode::InvalidConfig, "participants must be >= 1");
  if (config.participant_sigma < 0.0)
    throw Error(ErrorCode::InvalidConfig, "participant_sigma must be >= 0");

  TypistProfile base = config.base;
  if (base.special_key_rates.empty())
    base.special_key_rates = default_profile().special_key_rates;
  base.speedup = config.separation;
  validate_profile(base);

  std::vector<TypistProfile> typists;
  for (int p = 0; p < config.participants; ++p) {
    Rng rng(derive_seed(config.seed, 0x700000ULL + p));
    typists.push_back(jitter_profile(base, config.participant_sigma, rng));
  }

  SyntheticDataset out;
  json manifest;
  manifest["n_normal"] = config.n_normal;
  manifest["n_stress"] = config.n_stress;
  manifest["separation"] = config.separation;
  manifest["participants"] = config.participants;
  manifest["participant_sigma"] = config.participant_sigma;
  manifest["target_keys"] = config.target_keys;
  manifest["seed"] = config.seed;
  manifest["base_profile"] = profile_to_json(base);
  json rows = json::array();

  const auto pad = [](int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    return std::string(buf);
  };
  for (int i = 0; i < config.n_normal; ++i) {
    const int p = i % config.participants;
    const std::uint64_t s = derive_seed(config.seed, 0x100000ULL + i);
    const std::string sid = "normal_" + pad(i);
    out.sessions.push_back(
        generate_session(typists[p], false, config.target_keys, s, sid));
    rows.push_back({{"id", sid}, {"label", "normal"}, {"seed", s},
                    {"participant", p}});
  }
  for (int i = 0; i < config.n_stress; ++i) {
    const int p = i % config.participants;
    const std::uint64_t s = derive_seed(config.seed, 0x200000ULL + i);
    const std::string sid = "stress_" + pad(i);
    out.sessions.push_back(
        generate_session(typists[p], true, config.target_keys, s, sid));
    rows.push_back({{"id", sid}, {"label", "stress"}, {"seed", s},
                    {"participant", p}});
  }
  manifest["sessions"] = std::move(rows);
  out.manifest_json = manifest.dump(2);
  return out;
}

}  // namespace keydyn::synthgen
