#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace keydyn::detail {

// Minimal UTF-8 helpers for key codes. Codes are short strings (one
// codepoint for printable keys), so decoding stays byte-level simple.

inline std::vector<std::uint32_t> utf8_decode(const std::string& s) {
  std::vector<std::uint32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::uint32_t cp = 0;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      len = 2;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      len = 3;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      len = 4;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    out.push_back(ok ? cp : 0xFFFD);
    i += len;
  }
  return out;
}

inline void utf8_append(std::string& s, std::uint32_t cp) {
  if (cp < 0x80) {
    s.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    s.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    s.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    s.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

inline std::size_t utf8_length(const std::string& s) {
  return utf8_decode(s).size();
}

// Lowercase folding for Latin A-Z and Cyrillic А-Я / Ё. Other codepoints
// pass through unchanged.
inline std::uint32_t fold_codepoint(std::uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0x0410 && cp <= 0x042F) return cp + 0x20;  // А..Я -> а..я
  if (cp == 0x0401) return 0x0451;                     // Ё -> ё
  return cp;
}

inline std::string fold_lower(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::uint32_t cp : utf8_decode(s)) utf8_append(out, fold_codepoint(cp));
  return out;
}

// Splits a string into single-codepoint strings.
inline std::vector<std::string> utf8_chars(const std::string& s) {
  std::vector<std::string> out;
  for (std::uint32_t cp : utf8_decode(s)) {
    std::string c;
    utf8_append(c, cp);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace keydyn::detail
