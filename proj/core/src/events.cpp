#include "keydyn/events.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "keydyn/detail/utf8.hpp"
#include "json.hpp"

namespace keydyn::events {

namespace {

const std::array<const char*, 9> kSpecialKeys = {
    "backspace", "del", "capslock", "shift", "tab",
    "alt",       "esc", "enter",    "space"};

bool is_mouse_code(const std::string& code) {
  return code == "mouse_left" || code == "mouse_right";
}

}  // namespace

const char* label_name(Label label) {
  switch (label) {
    case Label::normal:
      return "normal";
    case Label::stress:
      return "stress";
    default:
      return "unlabeled";
  }
}

Label label_from_name(const std::string& name) {
  if (name == "normal") return Label::normal;
  if (name == "stress") return Label::stress;
  if (name == "unlabeled") return Label::unlabeled;
  throw Error(ErrorCode::ConfigInvalid, "unknown label: " + name);
}

bool is_special_key(const std::string& code) {
  return std::find(kSpecialKeys.begin(), kSpecialKeys.end(), code) !=
         kSpecialKeys.end();
}

bool is_character_code(const std::string& code) {
  return !is_special_key(code) && !is_mouse_code(code) &&
         detail::utf8_length(code) == 1;
}

RawEvent parse_event_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("bad JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw Error(ErrorCode::MalformedLine, "event line is not a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "t_ms" && key != "dev" && key != "code" && key != "action") {
      throw Error(ErrorCode::MalformedLine, "unexpected field: " + key);
    }
  }
  if (!j.contains("t_ms") || !j.contains("dev") || !j.contains("code") ||
      !j.contains("action")) {
    throw Error(ErrorCode::MalformedLine, "missing event field");
  }
  if (!j["t_ms"].is_number_integer()) {
    throw Error(ErrorCode::MalformedLine, "t_ms must be an integer");
  }

  RawEvent event;
  event.t_ms = j["t_ms"].get<std::int64_t>();
  if (event.t_ms < 0) {
    throw Error(ErrorCode::NegativeTimestamp,
                "t_ms " + std::to_string(event.t_ms) + " is negative");
  }

  const std::string dev = j["dev"].get<std::string>();
  if (dev == "kbd") {
    event.device = Device::keyboard;
  } else if (dev == "mouse") {
    event.device = Device::mouse;
  } else {
    throw Error(ErrorCode::MalformedLine, "unknown device: " + dev);
  }

  const std::string action = j["action"].get<std::string>();
  if (action == "down") {
    event.action = Action::down;
  } else if (action == "up") {
    event.action = Action::up;
  } else {
    throw Error(ErrorCode::MalformedLine, "unknown action: " + action);
  }

  std::string code = j["code"].get<std::string>();
  if (code.empty()) {
    throw Error(ErrorCode::UnknownCode, "empty code");
  }
  if (event.device == Device::mouse) {
    if (!is_mouse_code(code)) {
      throw Error(ErrorCode::UnknownCode, "not a mouse code: " + code);
    }
  } else {
    if (is_mouse_code(code)) {
      throw Error(ErrorCode::UnknownCode,
                  "mouse code on keyboard device: " + code);
    }
    if (!is_special_key(code)) {
      if (detail::utf8_length(code) != 1) {
        throw Error(ErrorCode::UnknownCode, "unknown key code: " + code);
      }
      code = detail::fold_lower(code);
    }
  }
  event.code = std::move(code);
  return event;
}

std::string serialize_event(const RawEvent& event) {
  nlohmann::json j;
  j["t_ms"] = event.t_ms;
  j["dev"] = event.device == Device::keyboard ? "kbd" : "mouse";
  j["code"] = event.code;
  j["action"] = event.action == Action::down ? "down" : "up";
  return j.dump();
}

Session normalize_session(const Session& session) {
  Session out;
  out.id = session.id;
  out.label = session.label;

  const auto& ev = session.events;
  std::vector<char> keep(ev.size(), 0);
  std::map<std::string, std::size_t> pending;  // code -> index of open down
  NormalizationSummary summary;

  for (std::size_t i = 0; i < ev.size(); ++i) {
    const RawEvent& e = ev[i];
    auto it = pending.find(e.code);
    if (e.action == Action::down) {
      if (it != pending.end()) {
        ++summary.auto_repeat_collapsed;
      } else {
        pending.emplace(e.code, i);
        keep[i] = 1;
      }
    } else {
      if (it == pending.end()) {
        ++summary.orphan_up_dropped;
      } else {
        pending.erase(it);
        keep[i] = 1;
      }
    }
  }
  for (const auto& [code, idx] : pending) {
    (void)code;
    keep[idx] = 0;
    ++summary.unmatched_down_dropped;
  }

  out.events.reserve(ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (keep[i]) out.events.push_back(ev[i]);
  }
  out.normalization = summary;
  out.duration_ms = out.events.empty()
                        ? 0
                        : out.events.back().t_ms - out.events.front().t_ms;
  return out;
}

Session load_session(const std::filesystem::path& path, Label label) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  Session session;
  session.id = path.stem().string();
  session.label = label;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      session.events.push_back(parse_event_line(line));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedLine) {
        throw Error(ErrorCode::MalformedLine, path.string() + ":" +
                                                  std::to_string(line_no) +
                                                  ": " + e.what());
      }
      throw;
    }
  }
  if (session.events.empty()) {
    throw Error(ErrorCode::EmptySession, "no events in " + path.string());
  }
  std::stable_sort(
      session.events.begin(), session.events.end(),
      [](const RawEvent& a, const RawEvent& b) { return a.t_ms < b.t_ms; });
  return normalize_session(session);
}

void save_session(const std::filesystem::path& path, const Session& session) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  for (const RawEvent& e : session.events) {
    out << serialize_event(e) << "\n";
  }
}

std::vector<Session> load_session_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<Session> sessions;
  bool any_dir = false;
  for (const char* name : {"normal", "stress"}) {
    const fs::path dir = root / name;
    if (!fs::is_directory(dir)) continue;
    any_dir = true;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      sessions.push_back(load_session(file, label_from_name(name)));
    }
  }
  if (!any_dir) {
    throw Error(ErrorCode::MissingInput,
                "no normal/ or stress/ subdirectory under " + root.string());
  }
  return sessions;
}

std::string normalization_summary_json(const Session& session) {
  nlohmann::json j;
  j["session"] = session.id;
  j["auto_repeat_collapsed"] = session.normalization.auto_repeat_collapsed;
  j["orphan_up_dropped"] = session.normalization.orphan_up_dropped;
  j["unmatched_down_dropped"] = session.normalization.unmatched_down_dropped;
  return j.dump();
}

}  // namespace keydyn::events
