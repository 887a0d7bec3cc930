#include "vgbench/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vgbench/digest.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

using nlohmann::json;

std::string_view to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::EmptyId: return "EmptyId";
    case ViolationKind::UnknownSpecialty: return "UnknownSpecialty";
    case ViolationKind::UnknownGoldSpecialty: return "UnknownGoldSpecialty";
    case ViolationKind::InvalidAge: return "InvalidAge";
    case ViolationKind::UnknownSex: return "UnknownSex";
    case ViolationKind::EmptyNarrative: return "EmptyNarrative";
    case ViolationKind::EmptyGoldDiagnosis: return "EmptyGoldDiagnosis";
    case ViolationKind::UnknownIncidence: return "UnknownIncidence";
    case ViolationKind::UnknownCourse: return "UnknownCourse";
    case ViolationKind::UnknownPresentation: return "UnknownPresentation";
  }
  return "Unknown";
}

bool ValidationReport::has(ViolationKind k) const noexcept {
  for (const auto& v : violations) {
    if (v.kind == k) return true;
  }
  return false;
}

ValidationReport validate_vignette(const RawVignette& v) {
  ValidationReport r;
  auto add = [&](ViolationKind k, std::string detail) { r.violations.push_back({k, std::move(detail)}); };
  if (text::trim(v.id).empty()) add(ViolationKind::EmptyId, "id is empty");
  if (!parse_specialty(v.specialty)) add(ViolationKind::UnknownSpecialty, "specialty '" + v.specialty + "'");
  if (!parse_specialty(v.gold_specialty)) {
    add(ViolationKind::UnknownGoldSpecialty, "gold_specialty '" + v.gold_specialty + "'");
  }
  if (v.age < 0) add(ViolationKind::InvalidAge, "age " + std::to_string(v.age));
  if (!parse_sex(v.sex)) add(ViolationKind::UnknownSex, "sex '" + v.sex + "'");
  if (text::trim(v.narrative).empty()) add(ViolationKind::EmptyNarrative, "narrative is empty");
  if (text::trim(v.gold_diagnosis).empty()) add(ViolationKind::EmptyGoldDiagnosis, "gold_diagnosis is empty");
  if (!parse_incidence(v.incidence)) add(ViolationKind::UnknownIncidence, "incidence '" + v.incidence + "'");
  if (!parse_course(v.course)) add(ViolationKind::UnknownCourse, "course '" + v.course + "'");
  if (!parse_presentation(v.presentation)) {
    add(ViolationKind::UnknownPresentation, "presentation '" + v.presentation + "'");
  }
  return r;
}

ValidationReport validate_vignette(const ClinicalVignette& v) { return validate_vignette(to_raw(v)); }

RawVignette to_raw(const ClinicalVignette& v) {
  RawVignette r;
  r.id = v.id;
  r.specialty = specialty_name(v.specialty);
  r.age = v.age;
  r.sex = to_string(v.sex);
  r.demographics = v.demographics;
  r.narrative = v.narrative;
  r.gold_diagnosis = v.gold_diagnosis;
  r.gold_synonyms = v.gold_synonyms;
  r.gold_specialty = specialty_name(v.gold_specialty);
  r.incidence = to_string(v.incidence);
  r.course = to_string(v.course);
  r.presentation = to_string(v.presentation);
  return r;
}

ClinicalVignette to_vignette(const RawVignette& raw) {
  const auto report = validate_vignette(raw);
  if (!report.ok()) {
    const auto& first = report.violations.front();
    const auto code = (first.kind == ViolationKind::UnknownSpecialty || first.kind == ViolationKind::UnknownGoldSpecialty)
                          ? ErrorCode::UnknownSpecialty
                          : ErrorCode::InvalidVignette;
    throw Error(code, "vignette '" + raw.id + "': " + first.detail);
  }
  ClinicalVignette v;
  v.id = raw.id;
  v.specialty = *parse_specialty(raw.specialty);
  v.age = static_cast<int>(raw.age);
  v.sex = *parse_sex(raw.sex);
  v.demographics = raw.demographics;
  v.narrative = raw.narrative;
  v.gold_diagnosis = raw.gold_diagnosis;
  v.gold_synonyms = raw.gold_synonyms;
  v.gold_specialty = *parse_specialty(raw.gold_specialty);
  v.incidence = *parse_incidence(raw.incidence);
  v.course = *parse_course(raw.course);
  v.presentation = *parse_presentation(raw.presentation);
  return v;
}

json to_json(const ClinicalVignette& v) {
  json demo = json::object();
  if (v.demographics.ethnicity) demo["ethnicity"] = *v.demographics.ethnicity;
  if (v.demographics.location) demo["location"] = *v.demographics.location;
  if (v.demographics.language) demo["language"] = *v.demographics.language;
  if (v.demographics.language_fluency) demo["language_fluency"] = *v.demographics.language_fluency;
  for (const auto& [k, val] : v.demographics.tags) demo[k] = val;
  json j = {
      {"id", v.id},
      {"specialty", specialty_name(v.specialty)},
      {"age", v.age},
      {"sex", to_string(v.sex)},
      {"narrative", v.narrative},
      {"gold_diagnosis", v.gold_diagnosis},
      {"gold_specialty", specialty_name(v.gold_specialty)},
      {"incidence", to_string(v.incidence)},
      {"course", to_string(v.course)},
      {"presentation", to_string(v.presentation)},
  };
  if (!demo.empty()) j["demographics"] = demo;
  if (!v.gold_synonyms.empty()) j["gold_synonyms"] = v.gold_synonyms;
  return j;
}

namespace {

std::string require_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::MalformedRecord, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw Error(ErrorCode::MalformedRecord, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

const std::set<std::string>& known_fields() {
  static const std::set<std::string> kFields = {
      "id",          "specialty",      "age",       "sex",    "demographics", "narrative",
      "gold_diagnosis", "gold_synonyms", "gold_specialty", "incidence", "course", "presentation",
  };
  return kFields;
}

}  // namespace

RawVignette raw_vignette_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedRecord, "record is not an object");
  for (const auto& [key, _] : j.items()) {
    if (!known_fields().count(key)) throw Error(ErrorCode::MalformedRecord, "unknown field '" + key + "'");
  }
  RawVignette r;
  r.id = require_string(j, "id");
  r.specialty = require_string(j, "specialty");
  const auto age = j.find("age");
  if (age == j.end() || !age->is_number_integer()) {
    throw Error(ErrorCode::MalformedRecord, "field 'age' must be an integer");
  }
  r.age = age->get<long long>();
  r.sex = require_string(j, "sex");
  r.narrative = require_string(j, "narrative");
  r.gold_diagnosis = require_string(j, "gold_diagnosis");
  r.gold_specialty = require_string(j, "gold_specialty");
  r.incidence = require_string(j, "incidence");
  r.course = require_string(j, "course");
  r.presentation = require_string(j, "presentation");
  if (const auto syn = j.find("gold_synonyms"); syn != j.end()) {
    if (!syn->is_array()) throw Error(ErrorCode::MalformedRecord, "field 'gold_synonyms' must be an array");
    for (const auto& s : *syn) {
      if (!s.is_string()) throw Error(ErrorCode::MalformedRecord, "gold_synonyms entries must be strings");
      r.gold_synonyms.push_back(s.get<std::string>());
    }
  }
  if (const auto demo = j.find("demographics"); demo != j.end()) {
    if (!demo->is_object()) throw Error(ErrorCode::MalformedRecord, "field 'demographics' must be an object");
    for (const auto& [key, val] : demo->items()) {
      if (!val.is_string()) throw Error(ErrorCode::MalformedRecord, "demographics." + key + " must be a string");
      auto s = val.get<std::string>();
      if (key == "ethnicity") r.demographics.ethnicity = s;
      else if (key == "location") r.demographics.location = s;
      else if (key == "language") r.demographics.language = s;
      else if (key == "language_fluency") r.demographics.language_fluency = s;
      else r.demographics.tags[key] = s;
    }
  }
  return r;
}

bool CorpusFilter::empty() const noexcept {
  return !specialty && !incidence && !course && !presentation && !min_age && !max_age && !sex;
}

bool CorpusFilter::matches(const ClinicalVignette& v) const noexcept {
  if (specialty && v.specialty != *specialty) return false;
  if (incidence && v.incidence != *incidence) return false;
  if (course && v.course != *course) return false;
  if (presentation && v.presentation != *presentation) return false;
  if (min_age && v.age < *min_age) return false;
  if (max_age && v.age > *max_age) return false;
  if (sex && v.sex != *sex) return false;
  return true;
}

json to_json(const CorpusFilter& f) {
  json j = json::object();
  if (f.specialty) j["specialty"] = specialty_name(*f.specialty);
  if (f.incidence) j["incidence"] = to_string(*f.incidence);
  if (f.course) j["course"] = to_string(*f.course);
  if (f.presentation) j["presentation"] = to_string(*f.presentation);
  if (f.min_age) j["min_age"] = *f.min_age;
  if (f.max_age) j["max_age"] = *f.max_age;
  if (f.sex) j["sex"] = to_string(*f.sex);
  return j;
}

CorpusFilter corpus_filter_from_json(const json& j) {
  CorpusFilter f;
  if (j.is_null()) return f;
  auto bad = [](const std::string& what) { return Error(ErrorCode::InvalidConfig, "filter: " + what); };
  if (!j.is_object()) throw bad("not an object");
  static const std::set<std::string> kKeys = {"specialty", "incidence", "course", "presentation",
                                              "min_age",   "max_age",   "sex"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw bad("unknown key '" + key + "'");
  }
  if (j.contains("specialty")) {
    f.specialty = parse_specialty(j.at("specialty").get<std::string>());
    if (!f.specialty) throw bad("unknown specialty");
  }
  if (j.contains("incidence")) {
    f.incidence = parse_incidence(j.at("incidence").get<std::string>());
    if (!f.incidence) throw bad("unknown incidence");
  }
  if (j.contains("course")) {
    f.course = parse_course(j.at("course").get<std::string>());
    if (!f.course) throw bad("unknown course");
  }
  if (j.contains("presentation")) {
    f.presentation = parse_presentation(j.at("presentation").get<std::string>());
    if (!f.presentation) throw bad("unknown presentation");
  }
  if (j.contains("min_age")) f.min_age = j.at("min_age").get<int>();
  if (j.contains("max_age")) f.max_age = j.at("max_age").get<int>();
  if (j.contains("sex")) {
    f.sex = parse_sex(j.at("sex").get<std::string>());
    if (!f.sex) throw bad("unknown sex");
  }
  return f;
}

Corpus::Corpus(std::vector<ClinicalVignette> vignettes, std::string hash)
    : vignettes_(std::move(vignettes)), hash_(std::move(hash)) {}

const ClinicalVignette* Corpus::find(std::string_view id) const {
  for (const auto& v : vignettes_) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

std::size_t Corpus::specialty_count() const {
  std::set<Specialty> seen;
  for (const auto& v : vignettes_) seen.insert(v.specialty);
  return seen.size();
}

CorpusCheck check_corpus(std::string_view bytes) {
  CorpusCheck check;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto end = bytes.find('\n', start);
    if (end == std::string_view::npos) end = bytes.size();
    const auto line = bytes.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    ++check.records;
    RawVignette raw;
    try {
      raw = raw_vignette_from_json(json::parse(line));
    } catch (const Error& e) {
      check.issues.push_back({line_no, "", e.code(), e.what()});
      continue;
    } catch (const json::exception& e) {
      check.issues.push_back({line_no, "", ErrorCode::MalformedRecord, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    const auto report = validate_vignette(raw);
    for (const auto& v : report.violations) {
      const auto code = (v.kind == ViolationKind::UnknownSpecialty || v.kind == ViolationKind::UnknownGoldSpecialty)
                            ? ErrorCode::UnknownSpecialty
                            : ErrorCode::InvalidVignette;
      check.issues.push_back({line_no, raw.id, code, std::string(to_string(v.kind)) + ": " + v.detail});
    }
    if (!ids.insert(raw.id).second) {
      check.issues.push_back({line_no, raw.id, ErrorCode::DuplicateId, "duplicate id '" + raw.id + "'"});
      continue;
    }
    if (report.ok()) check.vignettes.push_back(to_vignette(raw));
  }
  if (check.records == 0) check.issues.push_back({0, "", ErrorCode::EmptyCorpus, "corpus has no records"});
  return check;
}

Corpus parse_corpus(std::string_view bytes) {
  auto check = check_corpus(bytes);
  if (!check.issues.empty()) {
    const auto& first = check.issues.front();
    std::string where = first.line ? "line " + std::to_string(first.line) + ": " : "";
    throw Error(first.code, where + first.message);
  }
  return Corpus(std::move(check.vignettes), sha256_hex(bytes));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& v : corpus) {
    out += to_json(v).dump();
    out.push_back('\n');
  }
  return out;
}

Corpus stratify(const Corpus& corpus, const CorpusFilter& filter) {
  std::vector<ClinicalVignette> selected;
  for (const auto& v : corpus) {
    if (filter.matches(v)) selected.push_back(v);
  }
  if (selected.size() == corpus.size()) return corpus;
  Corpus tmp(std::move(selected), "");
  auto hash = sha256_hex(serialize_corpus(tmp));
  return Corpus(tmp.vignettes(), std::move(hash));
}

}  // namespace vgbench
