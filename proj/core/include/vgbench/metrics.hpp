#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgbench/conversation.hpp"
#include "vgbench/corpus.hpp"
#include "vgbench/judge.hpp"

namespace vgbench {

/// count/total as a percentage rounded half-up to one decimal, e.g.
/// (327, 400) -> "81.8". Integer arithmetic, so exact. "-" when total is 0.
std::string format_percent(int count, int total);

/// Tenths of a percent, rounded half-up; total must be positive.
int percent_tenths(int count, int total);

/// Any non-negative value rounded half-up to one decimal.
std::string format_one_decimal(double value);

struct SpecialtyRow {
  std::string label;
  int total = 0;
  int top1_correct = 0;
  int top2_correct = 0;
  int referral_correct = 0;
  /// Cases without a settled verdict: pending judgments, failed or unjudged
  /// conversations.
  int unresolved = 0;

  std::string top1_pct() const { return format_percent(top1_correct, total); }
  std::string top2_pct() const { return format_percent(top2_correct, total); }
  std::string referral_pct() const { return format_percent(referral_correct, total); }

  bool operator==(const SpecialtyRow&) const = default;
};

struct BaselineEntry {
  /// Mean questions asked by the comparison system.
  double mean = 0;
  /// Reference mean and percent-fewer as published, kept as annotations.
  std::optional<double> reference_mean;
  std::optional<double> published_fewer;

  bool operator==(const BaselineEntry&) const = default;
};

/// Per-specialty baseline question counts plus an overall row.
class BaselineTable {
 public:
  BaselineTable() = default;
  BaselineTable(std::map<Specialty, BaselineEntry> rows, std::optional<BaselineEntry> overall);

  /// Lines "specialty<TAB>mean[<TAB>reference_mean<TAB>published_fewer]";
  /// the overall row is labelled "Grand Total".
  static BaselineTable parse(std::string_view tsv);
  static BaselineTable load(const std::filesystem::path& path);

  const BaselineEntry* find(Specialty s) const;
  const std::optional<BaselineEntry>& overall() const noexcept { return overall_; }
  bool empty() const noexcept { return rows_.empty() && !overall_; }

 private:
  std::map<Specialty, BaselineEntry> rows_;
  std::optional<BaselineEntry> overall_;
};

struct QuestionRow {
  std::string label;
  int conversations = 0;
  int question_sum = 0;
  std::optional<BaselineEntry> baseline;

  std::optional<double> mean() const;
  /// Mean rounded to one decimal, "-" without conversations.
  std::string mean_text() const;
  /// (baseline - mean) / baseline from unrounded values; empty without a
  /// baseline or conversations.
  std::optional<double> percent_fewer() const;
  std::string percent_fewer_text() const;

  bool operator==(const QuestionRow&) const = default;
};

struct QuestionBlock {
  std::vector<QuestionRow> rows;
  QuestionRow total;

  bool operator==(const QuestionBlock&) const = default;
};

struct BenchmarkReport {
  std::string run_id;
  std::vector<SpecialtyRow> rows;
  SpecialtyRow grand;
  std::vector<SpecialtyRow> incidence;
  QuestionBlock questions;
  int human_verdicts = 0;
  int automated_verdicts = 0;
  int unresolved = 0;
  std::vector<std::string> unresolved_cases;
  bool provisional = true;

  bool operator==(const BenchmarkReport&) const = default;
};

/// Structured form served by the review API; percentages are the rendered
/// one-decimal strings.
nlohmann::json to_json(const BenchmarkReport& r);

/// Rows for the incidence classes present among the judged cases.
std::vector<SpecialtyRow> stratify_by_incidence(const std::vector<CaseJudgment>& judgments, const Corpus& corpus);

/// Mean question counts over normally closed conversations, per specialty
/// and overall, against `baseline`.
QuestionBlock question_stats(const std::vector<Conversation>& conversations, const Corpus& corpus,
                             const BaselineTable& baseline);

/// The case universe is every judged case plus every conversation. Throws
/// Error(ReferentialIntegrity) for ids missing from `corpus` and
/// Error(DuplicateId) for two judgments of one case.
BenchmarkReport aggregate(const std::vector<CaseJudgment>& judgments, const std::vector<Conversation>& conversations,
                          const Corpus& corpus, const BaselineTable& baseline = {}, std::string run_id = {});

enum class ReportFormat { Table, Csv, Markdown };

std::string_view to_string(ReportFormat f) noexcept;
/// "table", "csv" or "md"; anything else is Error(UnknownFormat).
ReportFormat parse_report_format(std::string_view s);
std::string_view file_extension(ReportFormat f) noexcept;

std::string render(const BenchmarkReport& r, ReportFormat f);

/// Inverse of render(r, Csv). Throws Error(MalformedReport).
BenchmarkReport parse_csv(std::string_view csv);

}  // namespace vgbench
