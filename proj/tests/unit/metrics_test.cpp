#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vgbench/error.hpp"
#include "vgbench/metrics.hpp"

using namespace vgbench;

namespace {

const fixtures::TableFixture& table() {
  static const auto f = fixtures::make_table_fixture();
  return f;
}

const BenchmarkReport& table_report() {
  static const auto r = aggregate(fixtures::table_judgments(table()), {}, table().corpus);
  return r;
}

const SpecialtyRow& row_for(const BenchmarkReport& r, Specialty s) {
  const auto label = std::string(specialty_label(s));
  auto it = std::find_if(r.rows.begin(), r.rows.end(), [&](const SpecialtyRow& row) { return row.label == label; });
  if (it == r.rows.end()) throw std::runtime_error("no row " + label);
  return *it;
}

// Conversation closed normally after `questions` question turns.
Conversation closed_with(const std::string& id, int questions) {
  Conversation c(id, "run");
  c.append("I have a rash.", "t");
  for (int i = 0; i < questions; ++i) {
    c.append("How long have you had it?", "t");
    c.append("A week.", "t");
  }
  c.append("This could be contact dermatitis.", "t");
  c.append("Thanks.", "t");
  c.finish(TerminalState::ClosedNormally);
  return c;
}

}  // namespace

TEST(FormatPercent, RoundsHalfUpToOneDecimal) {
  EXPECT_EQ(format_percent(327, 400), "81.8");
  EXPECT_EQ(format_percent(340, 400), "85.0");
  EXPECT_EQ(format_percent(383, 400), "95.8");
  EXPECT_EQ(format_percent(13, 13), "100.0");
  EXPECT_EQ(format_percent(16, 23), "69.6");
  EXPECT_EQ(format_percent(13, 16), "81.3");  // 81.25 rounds up
  EXPECT_EQ(format_percent(1, 8), "12.5");
  EXPECT_EQ(format_percent(1, 3), "33.3");
  EXPECT_EQ(format_percent(0, 7), "0.0");
  EXPECT_EQ(format_percent(0, 0), "-");
  EXPECT_EQ(percent_tenths(2, 3), 667);
}

TEST(FormatPercent, OneDecimalValues) {
  EXPECT_EQ(format_one_decimal(11.0), "11.0");
  EXPECT_EQ(format_one_decimal(0.05), "0.1");
  EXPECT_EQ(format_one_decimal(44.827), "44.8");
}

// Expected per-specialty cells.
struct TableRow {
  Specialty specialty;
  const char *top1, *top2, *referral;
};

class TableCells : public ::testing::TestWithParam<TableRow> {};

TEST_P(TableCells, ReproducedFromLabelledVerdicts) {
  const auto& e = GetParam();
  const auto& row = row_for(table_report(), e.specialty);
  EXPECT_EQ(row.top1_pct(), e.top1);
  EXPECT_EQ(row.top2_pct(), e.top2);
  EXPECT_EQ(row.referral_pct(), e.referral);
  EXPECT_EQ(row.unresolved, 0);
}

INSTANTIATE_TEST_SUITE_P(
    Specialties, TableCells,
    ::testing::Values(TableRow{Specialty::Cardiovascular, "80.0", "82.2", "93.3"},
                      TableRow{Specialty::Dermatology, "100.0", "100.0", "100.0"},
                      TableRow{Specialty::Endocrine, "77.8", "77.8", "94.4"},
                      TableRow{Specialty::ENT, "88.0", "92.0", "100.0"},
                      TableRow{Specialty::Gastroenterology, "83.7", "90.7", "100.0"},
                      TableRow{Specialty::Hematology, "69.6", "69.6", "73.9"},
                      TableRow{Specialty::InfectiousDiseases, "69.0", "75.9", "96.6"},
                      TableRow{Specialty::Nephrology, "81.3", "81.3", "87.5"},
                      TableRow{Specialty::Neurology, "81.0", "81.0", "100.0"},
                      TableRow{Specialty::ObstetricsGynecology, "84.6", "90.4", "98.1"},
                      TableRow{Specialty::Ophthalmology, "77.8", "88.9", "100.0"},
                      TableRow{Specialty::OrthopedicsRheumatology, "78.1", "78.1", "93.8"},
                      TableRow{Specialty::Respiratory, "86.1", "88.9", "97.2"},
                      TableRow{Specialty::Urology, "89.7", "89.7", "100.0"}));

TEST(TableReproduction, GrandTotals) {
  const auto& g = table_report().grand;
  EXPECT_EQ(g.total, 400);
  EXPECT_EQ(g.top1_correct, 327);
  EXPECT_EQ(g.top2_correct, 340);
  EXPECT_EQ(g.referral_correct, 383);
  EXPECT_EQ(g.top1_pct(), "81.8");
  EXPECT_EQ(g.top2_pct(), "85.0");
  EXPECT_EQ(g.referral_pct(), "95.8");
  EXPECT_FALSE(table_report().provisional);
}

TEST(TableReproduction, RowCountsMatchLabels) {
  for (const auto& c : fixtures::reference_counts()) {
    const auto& row = row_for(table_report(), c.specialty);
    EXPECT_EQ(row.total, c.total);
    EXPECT_EQ(row.top1_correct, c.top1);
    EXPECT_EQ(row.top2_correct, c.top2);
    EXPECT_EQ(row.referral_correct, c.referral);
  }
  EXPECT_EQ(table_report().rows.size(), kSpecialtyCount);
}

TEST(IncidenceStratification, ReproducesBothRows) {
  const auto& inc = table_report().incidence;
  ASSERT_EQ(inc.size(), 2u);
  EXPECT_EQ(inc[0].label, incidence_label(IncidenceClass::Common));
  EXPECT_EQ(inc[0].top1_pct(), "87.4");
  EXPECT_EQ(inc[0].top2_pct(), "91.0");
  EXPECT_EQ(inc[0].referral_pct(), "98.6");
  EXPECT_EQ(inc[1].label, incidence_label(IncidenceClass::LessCommon));
  EXPECT_EQ(inc[1].top1_pct(), "74.7");
  EXPECT_EQ(inc[1].top2_pct(), "77.5");
  EXPECT_EQ(inc[1].referral_pct(), "92.1");
  EXPECT_EQ(inc[0].total + inc[1].total, 400);
}

TEST(IncidenceStratification, OnlyPresentClasses) {
  const auto& f = table();
  std::vector<CaseJudgment> common;
  for (const auto& j : fixtures::table_judgments(f)) {
    if (f.corpus.find(j.case_id)->incidence == IncidenceClass::Common) common.push_back(j);
  }
  const auto rows = stratify_by_incidence(common, f.corpus);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].top1_pct(), "87.4");
}

TEST(Aggregate, GrandTotalEqualsColumnSums) {
  const auto& r = table_report();
  SpecialtyRow sum;
  for (const auto& row : r.rows) {
    sum.total += row.total;
    sum.top1_correct += row.top1_correct;
    sum.top2_correct += row.top2_correct;
    sum.referral_correct += row.referral_correct;
    sum.unresolved += row.unresolved;
  }
  EXPECT_EQ(sum.total, r.grand.total);
  EXPECT_EQ(sum.top1_correct, r.grand.top1_correct);
  EXPECT_EQ(sum.top2_correct, r.grand.top2_correct);
  EXPECT_EQ(sum.referral_correct, r.grand.referral_correct);
  EXPECT_EQ(sum.unresolved, r.grand.unresolved);
}

TEST(Aggregate, RejectsUnknownAndDuplicateCases) {
  auto js = fixtures::table_judgments(table());
  auto dup = js;
  dup.push_back(js.front());
  try {
    aggregate(dup, {}, table().corpus);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
  }
  js.push_back(fixtures::make_judgment("nobody-001", MatchRule::M1, MatchRule::M1, true));
  try {
    aggregate(js, {}, table().corpus);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ReferentialIntegrity);
  }
}

TEST(Aggregate, PendingAndFailedCasesAreUnresolvedNotDropped) {
  const auto& f = table();
  auto js = fixtures::table_judgments(f);
  const auto pending_id = js[0].case_id;
  js[0] = fixtures::make_judgment(pending_id, MatchRule::Unresolved, MatchRule::Unresolved, std::nullopt);
  // a conversation without any judgment
  const auto failed_id = js[1].case_id;
  js.erase(js.begin() + 1);
  Conversation failed(failed_id, "run");
  failed.append("Hello", "t");
  failed.finish(TerminalState::GatewayFailure, "timeout");

  const auto r = aggregate(js, {failed}, f.corpus);
  EXPECT_EQ(r.grand.total, 400);
  EXPECT_EQ(r.unresolved, 2);
  EXPECT_TRUE(r.provisional);
  EXPECT_NE(std::find(r.unresolved_cases.begin(), r.unresolved_cases.end(), pending_id), r.unresolved_cases.end());
  EXPECT_NE(std::find(r.unresolved_cases.begin(), r.unresolved_cases.end(), failed_id), r.unresolved_cases.end());
  // unresolved cases stay in the denominator
  EXPECT_EQ(r.grand.top1_correct, 325);
}

TEST(Aggregate, EmptyInputGivesDashes) {
  const auto r = aggregate({}, {}, table().corpus);
  EXPECT_EQ(r.grand.total, 0);
  EXPECT_EQ(r.grand.top1_pct(), "-");
  EXPECT_TRUE(r.rows.empty());
}

TEST(AggregateProperty, Top2NeverBelowTop1) {
  std::mt19937 rng(20241015);
  const auto& f = table();
  const std::array<MatchRule, 9> rules = {MatchRule::M1, MatchRule::M2, MatchRule::M3, MatchRule::M4, MatchRule::M5,
                                          MatchRule::N1, MatchRule::N2, MatchRule::N3, MatchRule::Unresolved};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<CaseJudgment> js;
    for (const auto& v : f.corpus) {
      if (rng() % 4 == 0) continue;
      const auto r1 = rules[rng() % rules.size()];
      const auto r2 = combine_top2(MatchVerdict{r1}, MatchVerdict{rules[rng() % rules.size()]}).rule;
      std::optional<bool> ref;
      if (rng() % 5) ref = rng() % 2 == 0;
      js.push_back(fixtures::make_judgment(v.id, r1, r2, ref));
    }
    const auto r = aggregate(js, {}, f.corpus);
    for (const auto& row : r.rows) {
      ASSERT_GE(row.top2_correct, row.top1_correct) << row.label << " trial " << trial;
      ASSERT_LE(row.top2_correct, row.total);
    }
    ASSERT_GE(r.grand.top2_correct, r.grand.top1_correct);
  }
}

TEST(AggregateProperty, PermutationInvariant) {
  std::mt19937 rng(7);
  auto js = fixtures::table_judgments(table());
  const auto& reference = table_report();
  for (int i = 0; i < 20; ++i) {
    std::shuffle(js.begin(), js.end(), rng);
    ASSERT_EQ(aggregate(js, {}, table().corpus), reference);
  }
}

TEST(QuestionStats, MeansAndPercentFewerAgainstBaseline) {
  const auto baseline = BaselineTable::load(fixtures::data_dir() / "baseline_questions.tsv");
  // two dermatology conversations with 16 questions each
  auto derm = std::find_if(table().corpus.begin(), table().corpus.end(),
                           [](const ClinicalVignette& v) { return v.specialty == Specialty::Dermatology; });
  std::vector<Conversation> convs = {closed_with(derm->id, 16), closed_with((derm + 1)->id, 16)};
  EXPECT_EQ(count_questions(convs[0]), 16);
  const auto block = question_stats(convs, table().corpus, baseline);
  ASSERT_EQ(block.rows.size(), 1u);
  EXPECT_EQ(block.rows[0].mean_text(), "16.0");
  // recomputed from the means, (28 - 16) / 28
  EXPECT_EQ(block.rows[0].percent_fewer_text(), "42.9");
  ASSERT_TRUE(block.rows[0].baseline.has_value());
  EXPECT_EQ(block.rows[0].baseline->published_fewer, 42.0);
  // overall row against the overall baseline
  EXPECT_EQ(block.total.conversations, 2);
  EXPECT_EQ(block.total.percent_fewer_text(), "44.8");
}

TEST(QuestionStats, OnlyNormallyClosedConversationsCount) {
  const auto& v = table().corpus.vignettes().front();
  Conversation capped(v.id, "run");
  capped.append("Hi", "t");
  capped.append("What brings you in?", "t");
  capped.finish(TerminalState::MaxTurnsReached);
  const auto block = question_stats({capped}, table().corpus, {});
  EXPECT_EQ(block.total.conversations, 0);
  EXPECT_EQ(block.total.mean_text(), "-");
  EXPECT_FALSE(block.total.percent_fewer().has_value());
}

TEST(Baseline, ParseRejectsBadRows) {
  EXPECT_NO_THROW(BaselineTable::parse("Dermatology\t28\n"));
  EXPECT_THROW(BaselineTable::parse("Dermatology\tmany\n"), Error);
  EXPECT_THROW(BaselineTable::parse("Podiatry\t20\n"), Error);
  EXPECT_THROW(BaselineTable::parse("Dermatology\t28\nDermatology\t29\n"), Error);
}

TEST(Render, CsvRoundTrips) {
  auto r = table_report();
  r.run_id = "run-x";
  const auto csv = render(r, ReportFormat::Csv);
  EXPECT_EQ(parse_csv(csv), r);
}

TEST(Render, CsvRoundTripsProvisionalReportWithQuestions) {
  const auto baseline = BaselineTable::load(fixtures::data_dir() / "baseline_questions.tsv");
  auto js = fixtures::table_judgments(table());
  js[3] = fixtures::make_judgment(js[3].case_id, MatchRule::M1, MatchRule::Unresolved, true);
  const auto r = aggregate(js, {closed_with(js[5].case_id, 9)}, table().corpus, baseline, "r2");
  ASSERT_TRUE(r.provisional);
  EXPECT_EQ(parse_csv(render(r, ReportFormat::Csv)), r);
}

TEST(Render, FormatsCarryTheCells) {
  const auto& r = table_report();
  for (auto f : {ReportFormat::Table, ReportFormat::Csv, ReportFormat::Markdown}) {
    const auto text = render(r, f);
    for (const char* cell : {"81.8", "85.0", "95.8", "69.6", "90.7", "87.4", "92.1"}) {
      EXPECT_NE(text.find(cell), std::string::npos) << to_string(f) << " lacks " << cell;
    }
  }
  EXPECT_EQ(render(r, ReportFormat::Table).find("PROVISIONAL"), std::string::npos);
}

TEST(Render, ProvisionalBannerListsUnresolved) {
  auto js = fixtures::table_judgments(table());
  const auto id = js.back().case_id;
  js.pop_back();
  Conversation c(id, "run");
  c.append("Hello", "t");
  c.finish(TerminalState::GatewayFailure, "boom");
  const auto r = aggregate(js, {c}, table().corpus);
  for (auto f : {ReportFormat::Table, ReportFormat::Markdown}) {
    const auto text = render(r, f);
    EXPECT_NE(text.find("PROVISIONAL"), std::string::npos);
    EXPECT_NE(text.find(id), std::string::npos);
  }
}

TEST(Render, ParseCsvRejectsGarbage) {
  EXPECT_THROW(parse_csv("not,a,report\n"), Error);
  EXPECT_THROW(parse_csv(""), Error);
}

TEST(ReportFormat, ParseNames) {
  EXPECT_EQ(parse_report_format("md"), ReportFormat::Markdown);
  EXPECT_EQ(file_extension(ReportFormat::Table), "txt");
  try {
    parse_report_format("pdf");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownFormat);
  }
}

TEST(ReportJson, PercentagesAreStrings) {
  const auto j = to_json(table_report());
  EXPECT_EQ(j["grand_total"]["top1_pct"], "81.8");
  EXPECT_EQ(j["provisional"], false);
  EXPECT_EQ(j["rows"].size(), kSpecialtyCount);
}
