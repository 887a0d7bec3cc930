#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace vgbench {

/// The closed list of referral specialties a vignette can belong to.
enum class Specialty {
  Cardiovascular,
  Dermatology,
  Endocrine,
  ENT,
  Gastroenterology,
  Hematology,
  InfectiousDiseases,
  Nephrology,
  Neurology,
  ObstetricsGynecology,
  Ophthalmology,
  OrthopedicsRheumatology,
  Respiratory,
  Urology,
};

inline constexpr std::size_t kSpecialtyCount = 14;

inline constexpr std::array<Specialty, kSpecialtyCount> kAllSpecialties = {
    Specialty::Cardiovascular,     Specialty::Dermatology,
    Specialty::Endocrine,          Specialty::ENT,
    Specialty::Gastroenterology,   Specialty::Hematology,
    Specialty::InfectiousDiseases, Specialty::Nephrology,
    Specialty::Neurology,          Specialty::ObstetricsGynecology,
    Specialty::Ophthalmology,      Specialty::OrthopedicsRheumatology,
    Specialty::Respiratory,        Specialty::Urology,
};

/// Canonical name, as written in corpus files ("Infectious diseases").
std::string_view specialty_name(Specialty s) noexcept;

/// Short label used in rendered report tables ("GI", "Infectious").
std::string_view specialty_label(Specialty s) noexcept;

/// Accepts the canonical name or the report label, case-insensitively.
/// Anything else (e.g. "Cardiology") is rejected.
std::optional<Specialty> parse_specialty(std::string_view text);

inline std::size_t index_of(Specialty s) noexcept { return static_cast<std::size_t>(s); }

enum class Sex { Male, Female };
enum class IncidenceClass { Common, LessCommon };
enum class DiseaseCourse { Acute, Chronic };
enum class PresentationClass { Typical, Atypical, Uncommon };

std::string_view to_string(Sex v) noexcept;
std::string_view to_string(IncidenceClass v) noexcept;
std::string_view to_string(DiseaseCourse v) noexcept;
std::string_view to_string(PresentationClass v) noexcept;

std::optional<Sex> parse_sex(std::string_view text);
std::optional<IncidenceClass> parse_incidence(std::string_view text);
std::optional<DiseaseCourse> parse_course(std::string_view text);
std::optional<PresentationClass> parse_presentation(std::string_view text);

/// Display label for an incidence class ("Common", "Less Common").
std::string_view incidence_label(IncidenceClass v) noexcept;

}  // namespace vgbench
