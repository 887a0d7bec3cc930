#include "vgbench/specialty.hpp"

#include "vgbench/text.hpp"

namespace vgbench {

namespace {

struct SpecialtyNames {
  std::string_view name;
  std::string_view label;
};

constexpr std::array<SpecialtyNames, kSpecialtyCount> kNames = {{
    {"Cardiovascular", "Cardiovascular"},
    {"Dermatology", "Dermatology"},
    {"Endocrine", "Endocrine"},
    {"ENT", "ENT"},
    {"Gastroenterology", "GI"},
    {"Hematology", "Hematology"},
    {"Infectious diseases", "Infectious"},
    {"Nephrology", "Nephrology"},
    {"Neurology", "Neurology"},
    {"Obstetrics and Gynecology", "Obstetrics and Gynecology"},
    {"Ophthalmology", "Ophthalmology"},
    {"Orthopedics and Rheumatology", "Orthopedics and Rheumatology"},
    {"Respiratory", "Respiratory"},
    {"Urology", "Urology"},
}};

}  // namespace

std::string_view specialty_name(Specialty s) noexcept { return kNames[index_of(s)].name; }

std::string_view specialty_label(Specialty s) noexcept { return kNames[index_of(s)].label; }

std::optional<Specialty> parse_specialty(std::string_view text) {
  const std::string wanted = text::to_lower(text::trim(text));
  for (Specialty s : kAllSpecialties) {
    if (wanted == text::to_lower(specialty_name(s)) || wanted == text::to_lower(specialty_label(s))) {
      return s;
    }
  }
  return std::nullopt;
}

std::string_view to_string(Sex v) noexcept { return v == Sex::Male ? "male" : "female"; }

std::string_view to_string(IncidenceClass v) noexcept {
  return v == IncidenceClass::Common ? "common" : "less_common";
}

std::string_view to_string(DiseaseCourse v) noexcept {
  return v == DiseaseCourse::Acute ? "acute" : "chronic";
}

std::string_view to_string(PresentationClass v) noexcept {
  switch (v) {
    case PresentationClass::Typical: return "typical";
    case PresentationClass::Atypical: return "atypical";
    case PresentationClass::Uncommon: return "uncommon";
  }
  return "typical";
}

std::string_view incidence_label(IncidenceClass v) noexcept {
  return v == IncidenceClass::Common ? "Common" : "Less Common";
}

std::optional<Sex> parse_sex(std::string_view text) {
  const auto t = text::to_lower(text::trim(text));
  if (t == "male") return Sex::Male;
  if (t == "female") return Sex::Female;
  return std::nullopt;
}

std::optional<IncidenceClass> parse_incidence(std::string_view text) {
  const auto t = text::to_lower(text::trim(text));
  if (t == "common") return IncidenceClass::Common;
  if (t == "less_common" || t == "less common") return IncidenceClass::LessCommon;
  return std::nullopt;
}

std::optional<DiseaseCourse> parse_course(std::string_view text) {
  const auto t = text::to_lower(text::trim(text));
  if (t == "acute") return DiseaseCourse::Acute;
  if (t == "chronic") return DiseaseCourse::Chronic;
  return std::nullopt;
}

std::optional<PresentationClass> parse_presentation(std::string_view text) {
  const auto t = text::to_lower(text::trim(text));
  if (t == "typical") return PresentationClass::Typical;
  if (t == "atypical") return PresentationClass::Atypical;
  if (t == "uncommon") return PresentationClass::Uncommon;
  return std::nullopt;
}

}  // namespace vgbench
