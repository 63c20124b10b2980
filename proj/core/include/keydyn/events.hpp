#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "keydyn/errors.hpp"

namespace keydyn::events {

enum class Device { keyboard, mouse };
enum class Action { down, up };
enum class Label { normal, stress, unlabeled };

const char* label_name(Label label);
Label label_from_name(const std::string& name);

// One logged key/button transition. Timestamps are session-relative
// milliseconds. Printable key codes are lowercase-folded at parse time so
// every consumer sees one spelling per key.
struct RawEvent {
  std::int64_t t_ms = 0;
  Device device = Device::keyboard;
  std::string code;
  Action action = Action::down;

  bool operator==(const RawEvent&) const = default;
};

struct NormalizationSummary {
  std::int64_t auto_repeat_collapsed = 0;
  std::int64_t orphan_up_dropped = 0;
  std::int64_t unmatched_down_dropped = 0;

  bool clean() const {
    return auto_repeat_collapsed == 0 && orphan_up_dropped == 0 &&
           unmatched_down_dropped == 0;
  }
};

// One log file's worth of events, sorted by t_ms. `duration_ms` is last
// minus first timestamp.
struct Session {
  std::string id;
  std::vector<RawEvent> events;
  Label label = Label::unlabeled;
  std::int64_t duration_ms = 0;
  NormalizationSummary normalization;
};

// Canonical non-printable key names accepted on the keyboard device.
bool is_special_key(const std::string& code);
// True for keyboard codes that are a single printable codepoint.
bool is_character_code(const std::string& code);

// Decodes one JSONL line {"t_ms":..,"dev":"kbd"|"mouse","code":..,"action":"down"|"up"}.
// Throws MalformedLine, UnknownCode or NegativeTimestamp.
RawEvent parse_event_line(const std::string& line);

// Inverse of parse_event_line; parse(serialize(e)) == e.
std::string serialize_event(const RawEvent& event);

// Repairs an ordered event stream: auto-repeat downs collapse to the first
// down, ups without a preceding down are dropped, downs never released
// before session end are dropped. Counts land in the returned summary.
// Idempotent.
Session normalize_session(const Session& session);

// Reads a JSONL file, sorts events stably by t_ms and normalizes.
// Throws IoError, MalformedLine (with line number) or EmptySession.
Session load_session(const std::filesystem::path& path, Label label);

void save_session(const std::filesystem::path& path, const Session& session);

// Loads `<root>/{normal,stress}/<id>.jsonl`, file order sorted by name.
std::vector<Session> load_session_dir(const std::filesystem::path& root);

// One-line JSON rendering of a session's normalization summary for the
// diagnostics stream.
std::string normalization_summary_json(const Session& session);

}  // namespace keydyn::events
