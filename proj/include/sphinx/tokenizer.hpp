#pragma once

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "sphinx/error.hpp"

// Deterministic token counting for budget enforcement and dataset statistics.
//
// BuiltinV1 rule, fixed forever: scan Unicode scalar values; whitespace
// characters delimit and are never counted; a token is
//   (a) a maximal run of letter characters,
//   (b) a maximal run of decimal digit characters, or
//   (c) any single other non-whitespace character.
// The letter and digit classes are the explicit code-point ranges below, not
// the full Unicode property tables; script blocks are admitted wholesale, so
// combining marks inside a word stay part of its run. Counts for CJK and
// Indic scripts therefore differ substantially from BPE tokenizers — a known
// bias. When fidelity matters, plug in an external counter (subprocess or
// HTTP endpoint); all budget guarantees are relative to the active counter.

namespace sphinx {

namespace unicode {

struct Range {
  char32_t lo;
  char32_t hi;
};

// Unicode White_Space property (the complete list).
inline constexpr std::array<Range, 10> kWhitespace = {{
    {0x0009, 0x000D}, {0x0020, 0x0020}, {0x0085, 0x0085}, {0x00A0, 0x00A0},
    {0x1680, 0x1680}, {0x2000, 0x200A}, {0x2028, 0x2029}, {0x202F, 0x202F},
    {0x205F, 0x205F}, {0x3000, 0x3000},
}};

// Decimal digits: ASCII plus the digit rows of the scripts in the shipped
// language roster. Anything else counts as a single "other" character.
inline constexpr std::array<Range, 12> kDigits = {{
    {0x0030, 0x0039},  // ASCII
    {0x0660, 0x0669},  // Arabic-Indic
    {0x06F0, 0x06F9},  // Extended Arabic-Indic
    {0x0966, 0x096F},  // Devanagari
    {0x09E6, 0x09EF},  // Bengali
    {0x0A66, 0x0A6F},  // Gurmukhi
    {0x0B66, 0x0B6F},  // Oriya
    {0x0BE6, 0x0BEF},  // Tamil
    {0x0C66, 0x0C6F},  // Telugu
    {0x0D66, 0x0D6F},  // Malayalam
    {0x0E50, 0x0E59},  // Thai
    {0x1040, 0x1049},  // Myanmar
}};

// Letter blocks (checked after digits, so the digit rows above win).
inline constexpr std::array<Range, 31> kLetters = {{
    {0x0041, 0x005A}, {0x0061, 0x007A},                    // Basic Latin
    {0x00C0, 0x00D6}, {0x00D8, 0x00F6}, {0x00F8, 0x02AF},  // Latin-1..Extended-B, IPA
    {0x0370, 0x03FF},                                      // Greek and Coptic
    {0x0400, 0x052F},                                      // Cyrillic (+Supplement)
    {0x0531, 0x058F},                                      // Armenian
    {0x0590, 0x05FF},                                      // Hebrew
    {0x0600, 0x06FF}, {0x0750, 0x077F},                    // Arabic (+Supplement)
    {0x0900, 0x097F},                                      // Devanagari
    {0x0980, 0x09FF},                                      // Bengali
    {0x0A00, 0x0A7F},                                      // Gurmukhi
    {0x0B00, 0x0B7F},                                      // Oriya
    {0x0B80, 0x0BFF},                                      // Tamil
    {0x0C00, 0x0C7F},                                      // Telugu
    {0x0D00, 0x0D7F},                                      // Malayalam
    {0x0E00, 0x0E7F},                                      // Thai
    {0x1000, 0x109F},                                      // Myanmar
    {0x1100, 0x11FF},                                      // Hangul Jamo
    {0x1E00, 0x1EFF}, {0x1F00, 0x1FFF},                    // Latin/Greek Extended
    {0x3040, 0x309F}, {0x30A0, 0x30FF},                    // Hiragana, Katakana
    {0x3400, 0x4DBF}, {0x4E00, 0x9FFF},                    // CJK Ext A, CJK Unified
    {0xAC00, 0xD7A3},                                      // Hangul Syllables
    {0xF900, 0xFAFF},                                      // CJK Compatibility
    {0xFF21, 0xFF5A},                                      // Fullwidth Latin
    {0x20000, 0x2A6DF},                                    // CJK Ext B
}};

template <std::size_t N>
inline bool in_ranges(char32_t cp, const std::array<Range, N>& ranges) {
  for (const Range& r : ranges) {
    if (cp >= r.lo && cp <= r.hi) return true;
  }
  return false;
}

/// Decodes the next UTF-8 scalar value at `i`, advancing `i`. Invalid
/// sequences consume one byte and yield U+FFFD.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const unsigned char bk = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

}  // namespace unicode

namespace detail {

enum class CharClass { Whitespace, Digit, Letter, Other };

inline CharClass classify(char32_t cp) {
  if (unicode::in_ranges(cp, unicode::kWhitespace)) return CharClass::Whitespace;
  if (unicode::in_ranges(cp, unicode::kDigits)) return CharClass::Digit;
  if (unicode::in_ranges(cp, unicode::kLetters)) return CharClass::Letter;
  return CharClass::Other;
}

inline std::size_t builtin_v1_count(std::string_view text) {
  enum class Run { None, Letter, Digit };
  Run run = Run::None;
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = unicode::decode_utf8(text, i);
    switch (classify(cp)) {
      case CharClass::Whitespace:
        run = Run::None;
        break;
      case CharClass::Letter:
        if (run != Run::Letter) ++count;
        run = Run::Letter;
        break;
      case CharClass::Digit:
        if (run != Run::Digit) ++count;
        run = Run::Digit;
        break;
      case CharClass::Other:
        ++count;
        run = Run::None;
        break;
    }
  }
  return count;
}

// Transit escaping for the subprocess counter: one text per line, with
// backslash and newline escaped so multi-line texts survive.
inline std::string escape_line(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Pluggable token counter. BuiltinV1 is pure and total over all text;
/// Command pipes newline-delimited texts through a shell command expecting
/// one integer per line; Endpoint POSTs a JSON array of texts and expects a
/// JSON integer array back.
class TokenCounter {
 public:
  enum class Kind { BuiltinV1, Command, Endpoint };

  static TokenCounter builtin() { return TokenCounter(Kind::BuiltinV1, ""); }
  static TokenCounter command(std::string cmdline) {
    return TokenCounter(Kind::Command, std::move(cmdline));
  }
  static TokenCounter endpoint(std::string url) {
    return TokenCounter(Kind::Endpoint, std::move(url));
  }

  Kind kind() const { return kind_; }
  const std::string& external_ref() const { return external_ref_; }

  std::size_t count(std::string_view text) const {
    if (kind_ == Kind::BuiltinV1) return detail::builtin_v1_count(text);
    std::vector<std::string> one{std::string(text)};
    return count_batch(one)[0];
  }

  std::vector<std::size_t> count_batch(const std::vector<std::string>& texts) const {
    switch (kind_) {
      case Kind::BuiltinV1: {
        std::vector<std::size_t> counts;
        counts.reserve(texts.size());
        for (const auto& t : texts) counts.push_back(detail::builtin_v1_count(t));
        return counts;
      }
      case Kind::Command:
        return command_batch(texts);
      case Kind::Endpoint:
        return endpoint_batch(texts);
    }
    throw Error::config("invalid token counter kind");
  }

 private:
  TokenCounter(Kind kind, std::string ref) : kind_(kind), external_ref_(std::move(ref)) {}

  std::vector<std::size_t> command_batch(const std::vector<std::string>& texts) const {
    char tmpl[] = "/tmp/sphinx_tok_XXXXXX";
    const int fd = ::mkstemp(tmpl);
    if (fd < 0) throw Error::io("cannot create temp file for external token counter");
    ::close(fd);
    const std::string tmp_path = tmpl;
    {
      std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
      for (const auto& t : texts) out << detail::escape_line(t) << '\n';
    }

    const std::string cmd = external_ref_ + " < '" + tmp_path + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
      std::remove(tmp_path.c_str());
      throw Error::io("external token counter failed to start: " + external_ref_);
    }
    std::string output;
    char buf[4096];
    std::size_t n;
    while ((n = ::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
    const int status = ::pclose(pipe);
    std::remove(tmp_path.c_str());
    if (status != 0) {
      throw Error::io("external token counter exited with status " + std::to_string(status));
    }

    std::vector<std::size_t> counts;
    std::size_t pos = 0;
    while (pos < output.size()) {
      std::size_t eol = output.find('\n', pos);
      if (eol == std::string::npos) eol = output.size();
      const std::string line = output.substr(pos, eol - pos);
      pos = eol + 1;
      if (line.empty()) continue;
      try {
        counts.push_back(std::stoull(line));
      } catch (const std::exception&) {
        throw Error::io("external token counter produced a non-integer line: " + line);
      }
    }
    if (counts.size() != texts.size()) {
      throw Error::io("external token counter returned " + std::to_string(counts.size()) +
                      " counts for " + std::to_string(texts.size()) + " texts");
    }
    return counts;
  }

  std::vector<std::size_t> endpoint_batch(const std::vector<std::string>& texts) const {
    std::string base = external_ref_;
    std::string path = "/";
    const std::size_t scheme = base.find("://");
    if (scheme != std::string::npos) {
      const std::size_t slash = base.find('/', scheme + 3);
      if (slash != std::string::npos) {
        path = base.substr(slash);
        base = base.substr(0, slash);
      }
    }
    httplib::Client client(base);
    client.set_read_timeout(30, 0);
    const nlohmann::json body = texts;
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) throw Error::io("token counter endpoint unreachable: " + external_ref_);
    if (res->status != 200) {
      throw Error::io("token counter endpoint returned HTTP " + std::to_string(res->status));
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_array() || reply.size() != texts.size()) {
      throw Error::io("token counter endpoint reply is not an integer array of matching size");
    }
    std::vector<std::size_t> counts;
    counts.reserve(reply.size());
    for (const auto& v : reply) {
      if (!v.is_number_unsigned() && !v.is_number_integer()) {
        throw Error::io("token counter endpoint reply contains a non-integer");
      }
      counts.push_back(v.get<std::size_t>());
    }
    return counts;
  }

  Kind kind_;
  std::string external_ref_;
};

/// Convenience free function matching the operation name used elsewhere.
inline std::size_t count_tokens(const TokenCounter& counter, std::string_view text) {
  return counter.count(text);
}

struct CorpusStats {
  std::size_t count = 0;
  long long mean_tokens = 0;  // nearest integer
  std::size_t max_tokens = 0;
};

/// Token statistics over rendered sample texts. Mean is reported to the
/// nearest integer.
inline CorpusStats corpus_stats(const std::vector<std::string>& texts, const TokenCounter& counter) {
  if (texts.empty()) throw Error::data("corpus_stats: empty input");
  const auto counts = counter.count_batch(texts);
  unsigned long long total = 0;
  std::size_t max_tokens = 0;
  for (std::size_t c : counts) {
    total += c;
    max_tokens = std::max(max_tokens, c);
  }
  CorpusStats stats;
  stats.count = counts.size();
  stats.mean_tokens = static_cast<long long>(
      (total + counts.size() / 2) / counts.size());
  stats.max_tokens = max_tokens;
  return stats;
}

}  // namespace sphinx
