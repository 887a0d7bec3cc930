#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vgbench {

struct SymptomMention {
  std::string term;         // surface phrase as matched (normalized)
  std::string concept_key;  // grouping key, e.g. "aching" -> "pain"
  bool negated = false;
};

/// Word lists used by the actor linter and by close detection. Phrases are
/// stored normalized; matching is on token boundaries.
class Lexicon {
 public:
  struct SymptomEntry {
    std::string phrase;
    std::string concept_key;
  };

  Lexicon(std::vector<std::string> jargon, std::vector<SymptomEntry> symptoms);

  /// Built-in lay symptom vocabulary and a curated clinical-term list.
  static const Lexicon& builtin();

  /// Copy with extra jargon terms (for example every gold-diagnosis name of a
  /// corpus). Terms are normalized; duplicates are dropped.
  Lexicon with_jargon(const std::vector<std::string>& terms) const;

  /// Reads one term per line; blank lines and '#' comments are skipped.
  Lexicon with_jargon_file(const std::filesystem::path& path) const;

  const std::vector<std::string>& jargon() const noexcept { return jargon_; }
  const std::vector<SymptomEntry>& symptoms() const noexcept { return symptoms_; }

  /// Jargon phrases occurring in `text`, longest first per position.
  std::vector<std::string> find_jargon(std::string_view text) const;

  /// Symptom mentions per clause, in order of appearance. A mention is
  /// negated when a negation cue precedes it in the same clause.
  std::vector<SymptomMention> symptom_mentions(std::string_view text) const;

  /// Concepts asserted as present in `text`.
  std::vector<std::string> asserted_concepts(std::string_view text) const;

 private:
  std::vector<std::string> jargon_;
  std::vector<SymptomEntry> symptoms_;
};

}  // namespace vgbench
