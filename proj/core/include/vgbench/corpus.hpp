#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgbench/error.hpp"
#include "vgbench/specialty.hpp"

namespace vgbench {

struct Demographics {
  std::optional<std::string> ethnicity;
  std::optional<std::string> location;
  std::optional<std::string> language;
  std::optional<std::string> language_fluency;
  /// Any other demographic key, kept verbatim.
  std::map<std::string, std::string> tags;

  bool operator==(const Demographics&) const = default;
};

/// One gold-standard case.
struct ClinicalVignette {
  std::string id;
  Specialty specialty = Specialty::Cardiovascular;
  int age = 0;
  Sex sex = Sex::Male;
  Demographics demographics;
  std::string narrative;
  std::string gold_diagnosis;
  std::vector<std::string> gold_synonyms;
  Specialty gold_specialty = Specialty::Cardiovascular;
  IncidenceClass incidence = IncidenceClass::Common;
  DiseaseCourse course = DiseaseCourse::Acute;
  PresentationClass presentation = PresentationClass::Typical;

  bool operator==(const ClinicalVignette&) const = default;
};

/// A vignette exactly as read from a file: enumerations are still text, so
/// values outside the closed lists can be reported instead of rejected.
struct RawVignette {
  std::string id;
  std::string specialty;
  long long age = 0;
  std::string sex;
  Demographics demographics;
  std::string narrative;
  std::string gold_diagnosis;
  std::vector<std::string> gold_synonyms;
  std::string gold_specialty;
  std::string incidence;
  std::string course;
  std::string presentation;
};

enum class ViolationKind {
  EmptyId,
  UnknownSpecialty,
  UnknownGoldSpecialty,
  InvalidAge,
  UnknownSex,
  EmptyNarrative,
  EmptyGoldDiagnosis,
  UnknownIncidence,
  UnknownCourse,
  UnknownPresentation,
};

std::string_view to_string(ViolationKind k) noexcept;

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  bool has(ViolationKind k) const noexcept;
};

ValidationReport validate_vignette(const RawVignette& v);
ValidationReport validate_vignette(const ClinicalVignette& v);

/// Converts a raw record; throws Error(InvalidVignette/UnknownSpecialty) when
/// validation fails.
ClinicalVignette to_vignette(const RawVignette& raw);
RawVignette to_raw(const ClinicalVignette& v);

nlohmann::json to_json(const ClinicalVignette& v);
/// Parses one record. Throws Error(MalformedRecord) on shape errors.
RawVignette raw_vignette_from_json(const nlohmann::json& j);

struct CorpusFilter {
  std::optional<Specialty> specialty;
  std::optional<IncidenceClass> incidence;
  std::optional<DiseaseCourse> course;
  std::optional<PresentationClass> presentation;
  std::optional<int> min_age;
  std::optional<int> max_age;
  std::optional<Sex> sex;

  bool empty() const noexcept;
  bool matches(const ClinicalVignette& v) const noexcept;
  bool operator==(const CorpusFilter&) const = default;
};

nlohmann::json to_json(const CorpusFilter& f);
CorpusFilter corpus_filter_from_json(const nlohmann::json& j);

/// Immutable after construction.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<ClinicalVignette> vignettes, std::string hash);

  const std::vector<ClinicalVignette>& vignettes() const noexcept { return vignettes_; }
  const std::string& hash() const noexcept { return hash_; }
  std::size_t size() const noexcept { return vignettes_.size(); }
  bool empty() const noexcept { return vignettes_.empty(); }

  const ClinicalVignette* find(std::string_view id) const;
  std::size_t specialty_count() const;

  auto begin() const noexcept { return vignettes_.begin(); }
  auto end() const noexcept { return vignettes_.end(); }

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<ClinicalVignette> vignettes_;
  std::string hash_;
};

/// One problem found while reading a corpus file. `line` is 1-based; 0 when
/// the problem is not tied to a line.
struct CorpusIssue {
  std::size_t line = 0;
  std::string record_id;
  ErrorCode code = ErrorCode::MalformedRecord;
  std::string message;
};

struct CorpusCheck {
  std::vector<ClinicalVignette> vignettes;
  std::vector<CorpusIssue> issues;
  std::size_t records = 0;
};

/// Reads every record of a corpus file and collects all problems instead of
/// stopping at the first one.
CorpusCheck check_corpus(std::string_view bytes);

/// Parses corpus bytes; the corpus hash is the SHA-256 of `bytes`.
/// Throws Error(EmptyCorpus | MalformedRecord | DuplicateId | UnknownSpecialty
/// | InvalidVignette) for the first problem, naming its line.
Corpus parse_corpus(std::string_view bytes);

/// Throws Error(Io) when the file cannot be read, then as parse_corpus.
Corpus load_corpus(const std::filesystem::path& path);

/// One JSON line per vignette, in corpus order.
std::string serialize_corpus(const Corpus& corpus);

/// Vignettes satisfying every constraint of `filter`, in corpus order. The
/// subset hash covers the selected records; selecting everything keeps the
/// source hash.
Corpus stratify(const Corpus& corpus, const CorpusFilter& filter);

}  // namespace vgbench
