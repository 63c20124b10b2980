#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "keydyn/events.hpp"
#include "keydyn/rng.hpp"
#include "oracles.hpp"

using namespace keydyn;
using events::Action;
using events::Device;
using events::Label;
using events::RawEvent;
using events::Session;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a keydyn::Error");
  return ErrorCode::IoError;
}

Session make_session(std::vector<RawEvent> ev, Label label = Label::normal) {
  Session s;
  s.id = "t";
  s.label = label;
  s.events = std::move(ev);
  s.duration_ms =
      s.events.empty() ? 0 : s.events.back().t_ms - s.events.front().t_ms;
  return s;
}

std::filesystem::path temp_file(const std::string& name,
                                const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("parse_event_line decodes the documented shapes") {
  const RawEvent kbd =
      events::parse_event_line(R"({"t_ms":100,"dev":"kbd","code":"а","action":"down"})");
  CHECK(kbd.t_ms == 100);
  CHECK(kbd.device == Device::keyboard);
  CHECK(kbd.code == "а");
  CHECK(kbd.action == Action::down);

  const RawEvent mouse =
      events::parse_event_line(R"({"t_ms":0,"dev":"mouse","code":"mouse_left","action":"up"})");
  CHECK(mouse.t_ms == 0);
  CHECK(mouse.device == Device::mouse);
  CHECK(mouse.code == "mouse_left");
  CHECK(mouse.action == Action::up);
}

TEST_CASE("parse_event_line folds printable codes to lowercase") {
  const auto latin =
      events::parse_event_line(R"({"t_ms":1,"dev":"kbd","code":"Q","action":"down"})");
  CHECK(latin.code == "q");
  const auto cyrillic =
      events::parse_event_line(R"({"t_ms":1,"dev":"kbd","code":"С","action":"down"})");
  CHECK(cyrillic.code == "с");
}

TEST_CASE("parse_event_line rejects bad lines with the right codes") {
  using events::parse_event_line;
  CHECK(code_of([] { parse_event_line("not json"); }) ==
        ErrorCode::MalformedLine);
  CHECK(code_of([] { parse_event_line("[1,2]"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] {
          parse_event_line(R"({"t_ms":1,"dev":"kbd","code":"а"})");
        }) == ErrorCode::MalformedLine);
  CHECK(code_of([] {
          parse_event_line(
              R"({"t_ms":1,"dev":"kbd","code":"а","action":"down","x":1})");
        }) == ErrorCode::MalformedLine);
  CHECK(code_of([] {
          parse_event_line(
              R"({"t_ms":1.5,"dev":"kbd","code":"а","action":"down"})");
        }) == ErrorCode::MalformedLine);
  CHECK(code_of([] {
          parse_event_line(
              R"({"t_ms":1,"dev":"pad","code":"а","action":"down"})");
        }) == ErrorCode::MalformedLine);
  CHECK(code_of([] {
          parse_event_line(
              R"({"t_ms":1,"dev":"kbd","code":"а","action":"hold"})");
        }) == ErrorCode::MalformedLine);
  CHECK(code_of([] {
          parse_event_line(
              R"({"t_ms":-5,"dev":"kbd","code":"а","action":"down"})");
        }) == ErrorCode::NegativeTimestamp);
  CHECK(code_of([] {
          parse_event_line(
              R"({"t_ms":1,"dev":"kbd","code":"sprocket","action":"down"})");
        }) == ErrorCode::UnknownCode);
  CHECK(code_of([] {
          parse_event_line(
              R"({"t_ms":1,"dev":"mouse","code":"mouse_middle","action":"down"})");
        }) == ErrorCode::UnknownCode);
  CHECK(code_of([] {
          parse_event_line(
              R"({"t_ms":1,"dev":"kbd","code":"mouse_left","action":"down"})");
        }) == ErrorCode::UnknownCode);
}

TEST_CASE("code classification covers the canonical names") {
  for (const char* s : {"backspace", "del", "capslock", "shift", "tab", "alt",
                        "esc", "enter", "space"}) {
    CHECK(events::is_special_key(s));
    CHECK_FALSE(events::is_character_code(s));
  }
  CHECK(events::is_character_code("а"));
  CHECK(events::is_character_code("q"));
  CHECK_FALSE(events::is_character_code("mouse_left"));
  CHECK_FALSE(events::is_character_code("ст"));
}

TEST_CASE("serialize and parse round-trip") {
  keydyn::Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    const Session s = oracle::random_session(rng);
    for (const RawEvent& e : s.events) {
      CHECK(events::parse_event_line(events::serialize_event(e)) == e);
    }
  }
}

TEST_CASE("normalize collapses auto-repeat to a single pair") {
  const Session s = make_session({
      {0, Device::keyboard, "а", Action::down},
      {30, Device::keyboard, "а", Action::down},
      {60, Device::keyboard, "а", Action::down},
      {90, Device::keyboard, "а", Action::up},
  });
  const Session n = events::normalize_session(s);
  REQUIRE(n.events.size() == 2);
  CHECK(n.events[0] == RawEvent{0, Device::keyboard, "а", Action::down});
  CHECK(n.events[1] == RawEvent{90, Device::keyboard, "а", Action::up});
  CHECK(n.normalization.auto_repeat_collapsed == 2);
  CHECK(n.duration_ms == 90);
}

TEST_CASE("normalize drops orphan ups and unmatched downs") {
  const Session s = make_session({
      {0, Device::keyboard, "а", Action::down},
      {50, Device::keyboard, "б", Action::up},   // never pressed
      {80, Device::keyboard, "а", Action::up},
      {100, Device::keyboard, "в", Action::down},  // never released
  });
  const Session n = events::normalize_session(s);
  REQUIRE(n.events.size() == 2);
  CHECK(n.events[0].code == "а");
  CHECK(n.events[1].code == "а");
  CHECK(n.normalization.orphan_up_dropped == 1);
  CHECK(n.normalization.unmatched_down_dropped == 1);
}

TEST_CASE("normalize is idempotent") {
  keydyn::Rng rng(23);
  for (int i = 0; i < 30; ++i) {
    oracle::SessionOptions opts;
    opts.dirty = true;
    const Session once = events::normalize_session(
        oracle::random_session(rng, opts));
    const Session twice = events::normalize_session(once);
    CHECK(twice.events == once.events);
    CHECK(twice.normalization.clean());
    CHECK(twice.duration_ms == once.duration_ms);
  }
}

TEST_CASE("load_session reads, sorts and normalizes") {
  const auto path = temp_file(
      "keydyn_two_line.jsonl",
      R"({"t_ms":100,"dev":"kbd","code":"а","action":"down"})"
      "\n"
      R"({"t_ms":180,"dev":"kbd","code":"а","action":"up"})"
      "\n");
  const Session s = events::load_session(path, Label::normal);
  CHECK(s.id == "keydyn_two_line");
  CHECK(s.duration_ms == 80);
  CHECK(s.label == Label::normal);
  REQUIRE(s.events.size() == 2);

  // out-of-order lines are sorted by t_ms before normalization
  const auto shuffled = temp_file(
      "keydyn_shuffled.jsonl",
      R"({"t_ms":180,"dev":"kbd","code":"а","action":"up"})"
      "\n"
      R"({"t_ms":100,"dev":"kbd","code":"а","action":"down"})"
      "\n");
  const Session s2 = events::load_session(shuffled, Label::stress);
  CHECK(s2.duration_ms == 80);
  CHECK(s2.events == s.events);
  CHECK(s2.label == Label::stress);
}

TEST_CASE("load_session error paths") {
  CHECK(code_of([] {
          events::load_session("/nonexistent/nope.jsonl", Label::normal);
        }) == ErrorCode::IoError);
  const auto empty = temp_file("keydyn_empty.jsonl", "\n\n");
  CHECK(code_of([&] { events::load_session(empty, Label::normal); }) ==
        ErrorCode::EmptySession);
  const auto bad = temp_file("keydyn_bad.jsonl", "{}\n");
  try {
    events::load_session(bad, Label::normal);
    FAIL("expected MalformedLine");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedLine);
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }
}

TEST_CASE("save_session then load_session round-trips") {
  keydyn::Rng rng(31);
  const Session s =
      events::normalize_session(oracle::random_session(rng));
  const auto path =
      std::filesystem::temp_directory_path() / "keydyn_roundtrip.jsonl";
  events::save_session(path, s);
  const Session back = events::load_session(path, s.label);
  CHECK(back.events == s.events);
  CHECK(back.duration_ms == s.duration_ms);
}

TEST_CASE("load_session_dir reads both labels in name order") {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "keydyn_dir_test";
  fs::remove_all(root);
  fs::create_directories(root / "normal");
  fs::create_directories(root / "stress");
  const std::string down =
      R"({"t_ms":0,"dev":"kbd","code":"а","action":"down"})"
      "\n"
      R"({"t_ms":50,"dev":"kbd","code":"а","action":"up"})"
      "\n";
  for (const char* name : {"b.jsonl", "a.jsonl"}) {
    std::ofstream(root / "normal" / name) << down;
  }
  std::ofstream(root / "stress" / "c.jsonl") << down;

  const auto sessions = events::load_session_dir(root);
  REQUIRE(sessions.size() == 3);
  CHECK(sessions[0].id == "a");
  CHECK(sessions[1].id == "b");
  CHECK(sessions[0].label == Label::normal);
  CHECK(sessions[2].id == "c");
  CHECK(sessions[2].label == Label::stress);

  CHECK(code_of([&] {
          events::load_session_dir(root / "missing");
        }) == ErrorCode::MissingInput);
}

TEST_CASE("normalization summary serializes counts") {
  const Session s = make_session({
      {0, Device::keyboard, "а", Action::down},
      {10, Device::keyboard, "а", Action::down},
      {80, Device::keyboard, "а", Action::up},
  });
  const Session n = events::normalize_session(s);
  const std::string j = events::normalization_summary_json(n);
  CHECK(j.find("\"auto_repeat_collapsed\":1") != std::string::npos);
  CHECK(j.find("\"session\":\"t\"") != std::string::npos);
}
