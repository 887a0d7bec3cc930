#include "vgbench/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace vgbench::text {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// U+2019 RIGHT SINGLE QUOTATION MARK, the usual typographic apostrophe.
constexpr std::string_view kCurlyApostrophe = "\xE2\x80\x99";

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    if (is_space(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

std::string normalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.substr(i, kCurlyApostrophe.size()) == kCurlyApostrophe) {
      i += kCurlyApostrophe.size() - 1;
      continue;
    }
    const auto c = static_cast<unsigned char>(s[i]);
    if (c == '\'') continue;
    if (c < 0x80 && std::ispunct(c)) {
      out.push_back(' ');
    } else {
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  return collapse_whitespace(out);
}

std::string normalize_name(std::string_view s) {
  std::string stripped;
  stripped.reserve(s.size());
  int depth = 0;
  for (char ch : s) {
    if (ch == '(') {
      ++depth;
      stripped.push_back(' ');
      continue;
    }
    if (ch == ')') {
      if (depth > 0) --depth;
      continue;
    }
    if (depth == 0) stripped.push_back(ch);
  }
  return normalize_text(stripped);
}

std::vector<std::string> tokens(std::string_view s) { return split(normalize_text(s), ' '); }

bool contains_phrase(std::string_view haystack, std::string_view phrase) {
  if (phrase.empty()) return false;
  std::string h;
  h.reserve(haystack.size() + 2);
  h.push_back(' ');
  h.append(haystack);
  h.push_back(' ');
  std::string p;
  p.reserve(phrase.size() + 2);
  p.push_back(' ');
  p.append(phrase);
  p.push_back(' ');
  return h.find(p) != std::string::npos;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto piece = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!piece.empty()) out.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> clauses(std::string_view s) {
  static constexpr std::array<std::string_view, 4> kConnectives = {"but", "however", "although", "though"};
  std::vector<std::string> out;
  std::string current;
  auto flush_sentence = [&](std::string_view sentence) {
    std::string clause;
    for (const auto& tok : tokens(sentence)) {
      if (std::find(kConnectives.begin(), kConnectives.end(), tok) != kConnectives.end()) {
        if (!clause.empty()) out.push_back(clause);
        clause.clear();
        continue;
      }
      if (!clause.empty()) clause.push_back(' ');
      clause += tok;
    }
    if (!clause.empty()) out.push_back(clause);
  };
  for (char ch : s) {
    if (ch == '.' || ch == '!' || ch == '?' || ch == ';' || ch == '\n') {
      flush_sentence(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  flush_sentence(current);
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

}  // namespace vgbench::text
