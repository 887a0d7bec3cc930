#include "vgbench/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vgbench/error.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

int percent_tenths(int count, int total) {
  // round-half-up(count * 1000 / total) without floating point
  const long long c = count;
  const long long t = total;
  return static_cast<int>((2 * c * 1000 + t) / (2 * t));
}

namespace {

std::string tenths_text(long long tenths) {
  const bool neg = tenths < 0;
  const auto a = neg ? -tenths : tenths;
  return (neg ? "-" : "") + std::to_string(a / 10) + "." + std::to_string(a % 10);
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_percent(int count, int total) {
  if (total <= 0) return "-";
  return tenths_text(percent_tenths(count, total));
}

std::string format_one_decimal(double value) {
  return tenths_text(static_cast<long long>(std::floor(value * 10.0 + 0.5)));
}

BaselineTable::BaselineTable(std::map<Specialty, BaselineEntry> rows, std::optional<BaselineEntry> overall)
    : rows_(std::move(rows)), overall_(std::move(overall)) {}

BaselineTable BaselineTable::parse(std::string_view tsv) {
  std::map<Specialty, BaselineEntry> rows;
  std::optional<BaselineEntry> overall;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t lineno = 0;
  auto number = [&](const std::string& s) {
    double v = 0;
    const auto t = text::trim(s);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(lineno) + ": not a number '" + s + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 2 && f.size() != 4) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(lineno) + ": expected 2 or 4 fields");
    }
    BaselineEntry e;
    e.mean = number(f[1]);
    if (f.size() == 4) {
      e.reference_mean = number(f[2]);
      e.published_fewer = number(f[3]);
    }
    if (text::to_lower(text::trim(f[0])) == "grand total") {
      if (overall) throw Error(ErrorCode::DuplicateId, "line " + std::to_string(lineno) + ": second Grand Total row");
      overall = e;
      continue;
    }
    const auto s = parse_specialty(f[0]);
    if (!s) throw Error(ErrorCode::UnknownSpecialty, "line " + std::to_string(lineno) + ": '" + f[0] + "'");
    if (!rows.emplace(*s, e).second) {
      throw Error(ErrorCode::DuplicateId, "line " + std::to_string(lineno) + ": second row for '" + f[0] + "'");
    }
  }
  return BaselineTable(std::move(rows), std::move(overall));
}

BaselineTable BaselineTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read baseline table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const BaselineEntry* BaselineTable::find(Specialty s) const {
  const auto it = rows_.find(s);
  return it == rows_.end() ? nullptr : &it->second;
}

std::optional<double> QuestionRow::mean() const {
  if (conversations <= 0) return std::nullopt;
  return static_cast<double>(question_sum) / conversations;
}

std::string QuestionRow::mean_text() const {
  if (conversations <= 0) return "-";
  const long long s = question_sum;
  const long long n = conversations;
  return tenths_text((2 * s * 10 + n) / (2 * n));
}

std::optional<double> QuestionRow::percent_fewer() const {
  const auto m = mean();
  if (!m || !baseline || baseline->mean <= 0) return std::nullopt;
  return (baseline->mean - *m) / baseline->mean * 100.0;
}

std::string QuestionRow::percent_fewer_text() const {
  const auto p = percent_fewer();
  return p ? format_one_decimal(*p) : "-";
}

namespace {

void count_into(SpecialtyRow& row, const CaseJudgment* j) {
  ++row.total;
  if (!j || j->pending()) ++row.unresolved;
  if (!j) return;
  if (j->top1.is_match()) ++row.top1_correct;
  if (j->top2.is_match()) ++row.top2_correct;
  if (j->referral_correct.value_or(false)) ++row.referral_correct;
}

void add_row(SpecialtyRow& into, const SpecialtyRow& r) {
  into.total += r.total;
  into.top1_correct += r.top1_correct;
  into.top2_correct += r.top2_correct;
  into.referral_correct += r.referral_correct;
  into.unresolved += r.unresolved;
}

const ClinicalVignette& require_case(const Corpus& corpus, const std::string& id) {
  const auto* v = corpus.find(id);
  if (!v) throw Error(ErrorCode::ReferentialIntegrity, "case '" + id + "' is not in the corpus");
  return *v;
}

}  // namespace

std::vector<SpecialtyRow> stratify_by_incidence(const std::vector<CaseJudgment>& judgments, const Corpus& corpus) {
  std::map<IncidenceClass, SpecialtyRow> by_class;
  for (const auto& j : judgments) {
    const auto& v = require_case(corpus, j.case_id);
    auto& row = by_class[v.incidence];
    row.label = std::string(incidence_label(v.incidence));
    count_into(row, &j);
  }
  std::vector<SpecialtyRow> out;
  for (auto& [k, row] : by_class) out.push_back(row);
  return out;
}

QuestionBlock question_stats(const std::vector<Conversation>& conversations, const Corpus& corpus,
                             const BaselineTable& baseline) {
  std::map<Specialty, QuestionRow> rows;
  QuestionBlock block;
  block.total.label = "Grand Total";
  block.total.baseline = baseline.overall();
  for (const auto& c : conversations) {
    const auto& v = require_case(corpus, c.vignette_id());
    if (c.terminal_state() != TerminalState::ClosedNormally) continue;
    auto& row = rows[v.specialty];
    if (row.label.empty()) {
      row.label = std::string(specialty_label(v.specialty));
      if (const auto* b = baseline.find(v.specialty)) row.baseline = *b;
    }
    ++row.conversations;
    row.question_sum += count_questions(c);
    ++block.total.conversations;
    block.total.question_sum += count_questions(c);
  }
  for (auto& [s, row] : rows) block.rows.push_back(row);
  return block;
}

BenchmarkReport aggregate(const std::vector<CaseJudgment>& judgments, const std::vector<Conversation>& conversations,
                          const Corpus& corpus, const BaselineTable& baseline, std::string run_id) {
  BenchmarkReport r;
  r.run_id = std::move(run_id);

  std::map<std::string, const CaseJudgment*> judged;
  for (const auto& j : judgments) {
    require_case(corpus, j.case_id);
    if (!judged.emplace(j.case_id, &j).second) {
      throw Error(ErrorCode::DuplicateId, "two judgments for case '" + j.case_id + "'");
    }
    (j.judge_kind == JudgeKind::Human ? r.human_verdicts : r.automated_verdicts) += 1;
  }
  std::set<std::string> universe;
  for (const auto& [id, j] : judged) universe.insert(id);
  for (const auto& c : conversations) {
    require_case(corpus, c.vignette_id());
    universe.insert(c.vignette_id());
  }

  std::map<Specialty, SpecialtyRow> rows;
  std::map<IncidenceClass, SpecialtyRow> incidence;
  for (const auto& id : universe) {
    const auto& v = *corpus.find(id);
    const auto it = judged.find(id);
    const CaseJudgment* j = it == judged.end() ? nullptr : it->second;
    auto& row = rows[v.specialty];
    row.label = std::string(specialty_label(v.specialty));
    count_into(row, j);
    auto& inc = incidence[v.incidence];
    inc.label = std::string(incidence_label(v.incidence));
    count_into(inc, j);
    if (!j || j->pending()) r.unresolved_cases.push_back(id);
  }

  r.grand.label = "Grand Total";
  for (auto& [s, row] : rows) {
    add_row(r.grand, row);
    r.rows.push_back(row);
  }
  for (auto& [k, row] : incidence) r.incidence.push_back(row);
  r.questions = question_stats(conversations, corpus, baseline);
  r.unresolved = static_cast<int>(r.unresolved_cases.size());
  r.provisional = r.unresolved > 0 || universe.empty();
  return r;
}

std::string_view to_string(ReportFormat f) noexcept {
  switch (f) {
    case ReportFormat::Table: return "table";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Markdown: return "md";
  }
  return "table";
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "table") return ReportFormat::Table;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "md") return ReportFormat::Markdown;
  throw Error(ErrorCode::UnknownFormat, "unknown report format '" + std::string(s) + "' (table, csv, md)");
}

std::string_view file_extension(ReportFormat f) noexcept {
  switch (f) {
    case ReportFormat::Table: return "txt";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Markdown: return "md";
  }
  return "txt";
}

namespace {

using Grid = std::vector<std::vector<std::string>>;

const std::vector<std::string> kAccuracyHeader = {"System",     "Cases",            "Top 1 Correct",
                                                  "Top 1 %",    "Top 2 Correct",    "Top 2 %",
                                                  "Referral Correct", "Referral %", "Unresolved"};
const std::vector<std::string> kQuestionHeader = {"System",        "Conversations", "Avg Questions",
                                                  "Baseline Avg",  "% Fewer",       "Published % Fewer"};

std::vector<std::string> accuracy_cells(const SpecialtyRow& r) {
  return {r.label,
          std::to_string(r.total),
          std::to_string(r.top1_correct),
          r.top1_pct(),
          std::to_string(r.top2_correct),
          r.top2_pct(),
          std::to_string(r.referral_correct),
          r.referral_pct(),
          std::to_string(r.unresolved)};
}

std::vector<std::string> question_cells(const QuestionRow& q) {
  return {q.label,
          std::to_string(q.conversations),
          q.mean_text(),
          q.baseline ? format_one_decimal(q.baseline->mean) : "-",
          q.percent_fewer_text(),
          q.baseline && q.baseline->published_fewer ? format_one_decimal(*q.baseline->published_fewer) : "-"};
}

// Fixed-width text table; a rule separates the header and, when `footer`,
// the last row.
std::string text_table(const Grid& grid, bool footer) {
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& row : grid) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += "  ";
      const auto pad = std::string(width[i] - row[i].size(), ' ');
      out += i == 0 ? row[i] + pad : pad + row[i];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::size_t total = 0;
  for (auto w : width) total += w;
  const std::string rule(total + 2 * (width.size() - 1), '-');
  std::string out = line(grid.front()) + rule + "\n";
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (footer && i + 1 == grid.size() && grid.size() > 2) out += rule + "\n";
    out += line(grid[i]);
  }
  return out;
}

std::string md_table(const Grid& grid) {
  std::string out;
  auto line = [&](const std::vector<std::string>& row) {
    out += "|";
    for (const auto& cell : row) out += " " + cell + " |";
    out += "\n";
  };
  line(grid.front());
  out += "|";
  for (std::size_t i = 0; i < grid.front().size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (std::size_t i = 1; i < grid.size(); ++i) line(grid[i]);
  return out;
}

Grid accuracy_grid(const BenchmarkReport& r) {
  Grid g{kAccuracyHeader};
  for (const auto& row : r.rows) g.push_back(accuracy_cells(row));
  g.push_back(accuracy_cells(r.grand));
  return g;
}

Grid incidence_grid(const BenchmarkReport& r) {
  Grid g{kAccuracyHeader};
  g.front().front() = "Incidence";
  for (const auto& row : r.incidence) g.push_back(accuracy_cells(row));
  return g;
}

Grid question_grid(const BenchmarkReport& r) {
  Grid g{kQuestionHeader};
  for (const auto& q : r.questions.rows) g.push_back(question_cells(q));
  g.push_back(question_cells(r.questions.total));
  return g;
}

std::string status_word(const BenchmarkReport& r) { return r.provisional ? "PROVISIONAL" : "FINAL"; }

std::string render_table(const BenchmarkReport& r) {
  std::string out = "Benchmark report  run: " + (r.run_id.empty() ? "-" : r.run_id) + "  status: " + status_word(r) + "\n\n";
  out += "Diagnostic accuracy and referral by system\n" + text_table(accuracy_grid(r), true) + "\n";
  out += "Accuracy by incidence\n" + text_table(incidence_grid(r), false) + "\n";
  out += "Average questions asked by system\n" + text_table(question_grid(r), true) + "\n";
  out += "Verdicts: " + std::to_string(r.automated_verdicts) + " automated, " + std::to_string(r.human_verdicts) +
         " human\n";
  out += "Unresolved cases: " + std::to_string(r.unresolved) + "\n";
  for (const auto& id : r.unresolved_cases) out += "  " + id + "\n";
  return out;
}

std::string render_markdown(const BenchmarkReport& r) {
  std::string out = "# Benchmark report\n\n";
  out += "- Run: " + (r.run_id.empty() ? std::string("-") : "`" + r.run_id + "`") + "\n";
  out += "- Status: **" + status_word(r) + "**\n";
  out += "- Verdicts: " + std::to_string(r.automated_verdicts) + " automated, " + std::to_string(r.human_verdicts) +
         " human\n";
  out += "- Unresolved cases: " + std::to_string(r.unresolved) + "\n\n";
  out += "## Diagnostic accuracy and referral by system\n\n" + md_table(accuracy_grid(r)) + "\n";
  out += "## Accuracy by incidence\n\n" + md_table(incidence_grid(r)) + "\n";
  out += "## Average questions asked by system\n\n" + md_table(question_grid(r));
  if (!r.unresolved_cases.empty()) {
    out += "\n## Unresolved cases\n\n";
    for (const auto& id : r.unresolved_cases) out += "- `" + id + "`\n";
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + csv_field(fields[i]);
  return out + "\n";
}

std::string opt_number(const std::optional<double>& v) { return v ? shortest(*v) : ""; }

std::vector<std::string> csv_accuracy(const std::string& kind, const SpecialtyRow& r) {
  auto cells = accuracy_cells(r);
  cells.insert(cells.begin(), kind);
  return cells;
}

std::vector<std::string> csv_question(const std::string& kind, const QuestionRow& q) {
  return {kind,
          q.label,
          std::to_string(q.conversations),
          std::to_string(q.question_sum),
          q.mean_text(),
          q.baseline ? shortest(q.baseline->mean) : "",
          q.baseline ? opt_number(q.baseline->reference_mean) : "",
          q.baseline ? opt_number(q.baseline->published_fewer) : "",
          q.percent_fewer_text()};
}

std::string render_csv(const BenchmarkReport& r) {
  std::string out;
  out += csv_line({"kind", "run_id", "status", "automated_verdicts", "human_verdicts", "unresolved"});
  out += csv_line({"meta", r.run_id, status_word(r), std::to_string(r.automated_verdicts),
                   std::to_string(r.human_verdicts), std::to_string(r.unresolved)});
  out += csv_line({"kind", "label", "cases", "top1_correct", "top1_pct", "top2_correct", "top2_pct",
                   "referral_correct", "referral_pct", "unresolved"});
  for (const auto& row : r.rows) out += csv_line(csv_accuracy("system", row));
  out += csv_line(csv_accuracy("total", r.grand));
  for (const auto& row : r.incidence) out += csv_line(csv_accuracy("incidence", row));
  out += csv_line({"kind", "label", "conversations", "question_sum", "avg_questions", "baseline_avg",
                   "published_reference_avg", "published_pct_fewer", "pct_fewer"});
  for (const auto& q : r.questions.rows) out += csv_line(csv_question("questions", q));
  out += csv_line(csv_question("questions_total", r.questions.total));
  out += csv_line({"kind", "case_id"});
  for (const auto& id : r.unresolved_cases) out += csv_line({"unresolved_case", id});
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void malformed(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::MalformedReport, "line " + std::to_string(line) + ": " + msg);
}

int to_int(const std::string& s, std::size_t line) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v < 0) malformed(line, "bad count '" + s + "'");
  return v;
}

std::optional<double> to_opt_double(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) malformed(line, "bad number '" + s + "'");
  return v;
}

SpecialtyRow parse_accuracy(const std::vector<std::string>& f, std::size_t line) {
  if (f.size() != 10) malformed(line, "accuracy record needs 10 fields");
  SpecialtyRow r;
  r.label = f[1];
  r.total = to_int(f[2], line);
  r.top1_correct = to_int(f[3], line);
  r.top2_correct = to_int(f[5], line);
  r.referral_correct = to_int(f[7], line);
  r.unresolved = to_int(f[9], line);
  if (r.top1_pct() != f[4] || r.top2_pct() != f[6] || r.referral_pct() != f[8]) {
    malformed(line, "percentages disagree with counts");
  }
  return r;
}

QuestionRow parse_question(const std::vector<std::string>& f, std::size_t line) {
  if (f.size() != 9) malformed(line, "question record needs 9 fields");
  QuestionRow q;
  q.label = f[1];
  q.conversations = to_int(f[2], line);
  q.question_sum = to_int(f[3], line);
  if (const auto b = to_opt_double(f[5], line)) {
    q.baseline = BaselineEntry{*b, to_opt_double(f[6], line), to_opt_double(f[7], line)};
  }
  if (q.mean_text() != f[4] || q.percent_fewer_text() != f[8]) malformed(line, "derived values disagree");
  return q;
}

}  // namespace

nlohmann::json to_json(const BenchmarkReport& r) {
  using nlohmann::json;
  auto row = [](const SpecialtyRow& x) {
    return json{{"label", x.label},
                {"cases", x.total},
                {"top1_correct", x.top1_correct},
                {"top1_pct", x.top1_pct()},
                {"top2_correct", x.top2_correct},
                {"top2_pct", x.top2_pct()},
                {"referral_correct", x.referral_correct},
                {"referral_pct", x.referral_pct()},
                {"unresolved", x.unresolved}};
  };
  auto qrow = [](const QuestionRow& q) {
    return json{{"label", q.label},
                {"conversations", q.conversations},
                {"question_sum", q.question_sum},
                {"avg_questions", q.mean_text()},
                {"baseline_avg", q.baseline ? json(format_one_decimal(q.baseline->mean)) : json(nullptr)},
                {"pct_fewer", q.percent_fewer() ? json(q.percent_fewer_text()) : json(nullptr)},
                {"published_pct_fewer", q.baseline && q.baseline->published_fewer
                                            ? json(format_one_decimal(*q.baseline->published_fewer))
                                            : json(nullptr)}};
  };
  json j;
  j["run_id"] = r.run_id;
  j["provisional"] = r.provisional;
  j["rows"] = json::array();
  for (const auto& x : r.rows) j["rows"].push_back(row(x));
  j["grand_total"] = row(r.grand);
  j["incidence"] = json::array();
  for (const auto& x : r.incidence) j["incidence"].push_back(row(x));
  j["questions"] = json::array();
  for (const auto& q : r.questions.rows) j["questions"].push_back(qrow(q));
  j["questions_total"] = qrow(r.questions.total);
  j["human_verdicts"] = r.human_verdicts;
  j["automated_verdicts"] = r.automated_verdicts;
  j["unresolved"] = r.unresolved;
  j["unresolved_cases"] = r.unresolved_cases;
  return j;
}

std::string render(const BenchmarkReport& r, ReportFormat f) {
  switch (f) {
    case ReportFormat::Table: return render_table(r);
    case ReportFormat::Csv: return render_csv(r);
    case ReportFormat::Markdown: return render_markdown(r);
  }
  throw Error(ErrorCode::UnknownFormat, "unknown report format");
}

BenchmarkReport parse_csv(std::string_view csv) {
  BenchmarkReport r;
  bool saw_meta = false;
  bool saw_total = false;
  bool saw_qtotal = false;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const auto& kind = f[0];
    if (kind == "kind") continue;
    if (kind == "meta") {
      if (f.size() != 6) malformed(lineno, "meta record needs 6 fields");
      r.run_id = f[1];
      if (f[2] != "PROVISIONAL" && f[2] != "FINAL") malformed(lineno, "unknown status");
      r.provisional = f[2] == "PROVISIONAL";
      r.automated_verdicts = to_int(f[3], lineno);
      r.human_verdicts = to_int(f[4], lineno);
      r.unresolved = to_int(f[5], lineno);
      saw_meta = true;
    } else if (kind == "system") {
      r.rows.push_back(parse_accuracy(f, lineno));
    } else if (kind == "total") {
      r.grand = parse_accuracy(f, lineno);
      saw_total = true;
    } else if (kind == "incidence") {
      r.incidence.push_back(parse_accuracy(f, lineno));
    } else if (kind == "questions") {
      r.questions.rows.push_back(parse_question(f, lineno));
    } else if (kind == "questions_total") {
      r.questions.total = parse_question(f, lineno);
      saw_qtotal = true;
    } else if (kind == "unresolved_case") {
      if (f.size() != 2) malformed(lineno, "unresolved_case record needs 2 fields");
      r.unresolved_cases.push_back(f[1]);
    } else {
      malformed(lineno, "unknown record kind '" + kind + "'");
    }
  }
  if (!saw_meta || !saw_total || !saw_qtotal) throw Error(ErrorCode::MalformedReport, "missing meta or total records");
  if (static_cast<int>(r.unresolved_cases.size()) != r.unresolved) {
    throw Error(ErrorCode::MalformedReport, "unresolved count disagrees with listed cases");
  }
  return r;
}

}  // namespace vgbench
