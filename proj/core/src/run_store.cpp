#include "vgbench/run_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vgbench/digest.hpp"
#include "vgbench/error.hpp"

namespace vgbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void io_error(const std::string& what, const fs::path& p) {
  throw Error(ErrorCode::Io, what + " " + p.string() + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view bytes, const fs::path& p) {
  while (!bytes.empty()) {
    const auto n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_error("write", p);
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Case ids become file names; anything outside [A-Za-z0-9._-] is %-escaped.
std::string file_stem(std::string_view id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '-' || c == '_' || (c == '.' && !out.empty())) {
      out.push_back(static_cast<char>(c));
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

// Complete lines of `bytes`; a trailing fragment without newline is torn.
std::vector<std::string> complete_lines(const std::string& bytes, std::size_t& torn) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < bytes.size()) {
    const auto nl = bytes.find('\n', start);
    if (nl == std::string::npos) {
      ++torn;
      break;
    }
    if (nl > start) out.push_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

}  // namespace

bool RunManifest::operator==(const RunManifest& o) const { return to_json(*this) == to_json(o); }

json to_json(const RunManifest& m) {
  auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  json j = {
      {"run_id", m.run_id},
      {"corpus_hash", m.corpus_hash},
      {"filter", to_json(m.filter)},
      {"case_count", m.case_count},
      {"sut", {{"name", m.sut_name}, {"version", m.sut_version}, {"model", m.sut_model}}},
      {"gateway_mode", to_string(m.mode)},
      {"actor_model", m.actor_model},
      {"judge_model", opt(m.judge_model)},
      {"actor_cassette", opt(m.actor_cassette)},
      {"sut_cassette", opt(m.sut_cassette)},
      {"guideline_version", m.guideline_version},
      {"policy",
       {{"max_turns", m.max_turns},
        {"retries", m.retries},
        {"timeout_ms", m.timeout_ms},
        {"rate_limit", m.rate_limit ? json{{"requests", m.rate_limit->requests},
                                           {"interval_ms", m.rate_limit->interval.count()}}
                                    : json(nullptr)},
        {"workers", m.workers}}},
      {"started_at", m.started_at},
      {"ended_at", opt(m.ended_at)},
  };
  return j;
}

RunManifest run_manifest_from_json(const json& j) {
  try {
    auto opt = [&](const json& v) -> std::optional<std::string> {
      if (v.is_null()) return std::nullopt;
      return v.get<std::string>();
    };
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.filter = corpus_filter_from_json(j.at("filter"));
    m.case_count = j.at("case_count").get<std::size_t>();
    const auto& sut = j.at("sut");
    m.sut_name = sut.at("name").get<std::string>();
    m.sut_version = sut.at("version").get<std::string>();
    m.sut_model = sut.at("model").get<std::string>();
    const auto mode = parse_gateway_mode(j.at("gateway_mode").get<std::string>());
    if (!mode) throw Error(ErrorCode::CorruptManifest, "unknown gateway mode");
    m.mode = *mode;
    m.actor_model = j.at("actor_model").get<std::string>();
    m.judge_model = opt(j.at("judge_model"));
    m.actor_cassette = opt(j.at("actor_cassette"));
    m.sut_cassette = opt(j.at("sut_cassette"));
    m.guideline_version = j.at("guideline_version").get<std::string>();
    const auto& p = j.at("policy");
    m.max_turns = p.at("max_turns").get<int>();
    m.retries = p.at("retries").get<int>();
    m.timeout_ms = p.at("timeout_ms").get<long long>();
    if (const auto& rl = p.at("rate_limit"); !rl.is_null()) {
      m.rate_limit = RateLimit{rl.at("requests").get<int>(),
                               std::chrono::milliseconds{rl.at("interval_ms").get<long long>()}};
    }
    m.workers = p.at("workers").get<int>();
    m.started_at = j.at("started_at").get<std::string>();
    m.ended_at = opt(j.at("ended_at"));
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, std::string("manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptManifest) throw;
    throw Error(ErrorCode::CorruptManifest, std::string("manifest: ") + e.what());
  }
}

void validate_manifest(const RunManifest& m) {
  if (m.run_id.empty()) throw Error(ErrorCode::InvalidConfig, "run id is empty");
  if (m.run_id.find_first_of("/\\") != std::string::npos || m.run_id == "." || m.run_id == "..") {
    throw Error(ErrorCode::InvalidConfig, "run id may not contain path separators");
  }
  if (m.corpus_hash.empty()) throw Error(ErrorCode::InvalidConfig, "corpus hash unknown");
  if (m.mode == GatewayMode::Replay && (!m.actor_cassette || !m.sut_cassette)) {
    throw Error(ErrorCode::InvalidConfig, "replay mode needs actor and sut cassette paths");
  }
  if (m.mode == GatewayMode::Record && (!m.actor_cassette || !m.sut_cassette)) {
    throw Error(ErrorCode::InvalidConfig, "record mode needs actor and sut cassette paths");
  }
}

std::string make_run_id(TimePoint now) {
  auto stamp = format_timestamp(now);  // 2026-10-15T09:30:00.123Z
  std::string compact;
  for (char c : stamp) {
    if (c != '-' && c != ':' && c != '.') compact.push_back(c);
  }
  return compact + "-" + random_hex(3);
}

void append_durable(const fs::path& path, std::string_view bytes) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) io_error("open", path);
  write_all(fd, bytes, path);
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_error("fsync", path);
  }
  ::close(fd);
}

void write_atomic(const fs::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_error("open", tmp);
  write_all(fd, bytes, tmp);
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_error("fsync", tmp);
  }
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunStore::RunStore(fs::path root) : root_(std::move(root)) {}

fs::path RunStore::run_dir(std::string_view run_id) const { return root_ / std::string(run_id); }

fs::path RunStore::transcript_path(std::string_view run_id, std::string_view case_id) const {
  return run_dir(run_id) / "transcripts" / (file_stem(case_id) + ".jsonl");
}

bool RunStore::exists(std::string_view run_id) const { return fs::exists(run_dir(run_id) / "manifest.json"); }

RunManifest RunStore::open_run(const RunManifest& m) {
  validate_manifest(m);
  const auto dir = run_dir(m.run_id);
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + root_.string() + ": " + ec.message());
  // create_directory reports false when the directory already exists, which
  // makes the id collision check race-free across processes.
  if (!fs::create_directory(dir, ec)) {
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
    throw Error(ErrorCode::RunExists, "run '" + m.run_id + "' already exists");
  }
  RunManifest stored = m;
  stored.ended_at.reset();
  write_atomic(dir / "manifest.json", to_json(stored).dump(2) + "\n");
  fs::create_directories(dir / "transcripts", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create transcripts directory: " + ec.message());
  return stored;
}

RunManifest RunStore::manifest(std::string_view run_id) const {
  const auto path = run_dir(run_id) / "manifest.json";
  if (!fs::exists(run_dir(run_id))) throw Error(ErrorCode::UnknownRun, "unknown run '" + std::string(run_id) + "'");
  if (!fs::exists(path)) throw Error(ErrorCode::CorruptManifest, "run '" + std::string(run_id) + "' has no manifest");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, std::string("manifest: ") + e.what());
  }
  return run_manifest_from_json(j);
}

void RunStore::require_open(std::string_view run_id) const {
  if (manifest(run_id).closed()) throw Error(ErrorCode::RunClosed, "run '" + std::string(run_id) + "' is closed");
}

void RunStore::begin_transcript(std::string_view run_id, std::string_view case_id) {
  require_open(run_id);
  const json rec = {{"record", "start"}, {"case_id", case_id}, {"run_id", run_id}};
  append_durable(transcript_path(run_id, case_id), rec.dump() + "\n");
}

void RunStore::append_turn(std::string_view run_id, std::string_view case_id, const Turn& t) {
  require_open(run_id);
  json rec = to_json(t);
  rec["record"] = "turn";
  append_durable(transcript_path(run_id, case_id), rec.dump() + "\n");
}

void RunStore::end_transcript(std::string_view run_id, const Conversation& c) {
  require_open(run_id);
  const json rec = {
      {"record", "end"},
      {"terminal_state", to_string(c.terminal_state())},
      {"failure", c.failure() ? json(*c.failure()) : json(nullptr)},
      {"turns", c.size()},
      {"question_count", c.question_count()},
  };
  append_durable(transcript_path(run_id, c.vignette_id()), rec.dump() + "\n");
}

void RunStore::write_conversation(std::string_view run_id, const Conversation& c) {
  begin_transcript(run_id, c.vignette_id());
  for (const auto& t : c.turns()) append_turn(run_id, c.vignette_id(), t);
  end_transcript(run_id, c);
}

void RunStore::append_verdict(std::string_view run_id, const CaseJudgment& j) {
  manifest(run_id);  // existence check
  std::lock_guard lock(verdict_mu_);
  append_durable(run_dir(run_id) / "verdicts.jsonl", to_json(j).dump() + "\n");
}

void RunStore::write_report(std::string_view run_id, ReportFormat f, std::string_view bytes) {
  manifest(run_id);
  write_atomic(run_dir(run_id) / ("report." + std::string(file_extension(f))), bytes);
}

void RunStore::write_corpus_snapshot(std::string_view run_id, const Corpus& corpus) {
  manifest(run_id);
  write_atomic(run_dir(run_id) / "corpus.jsonl", serialize_corpus(corpus));
}

void RunStore::write_baseline_snapshot(std::string_view run_id, std::string_view tsv) {
  manifest(run_id);
  write_atomic(run_dir(run_id) / "baseline.tsv", tsv);
}

RunManifest RunStore::close_run(std::string_view run_id, std::string ended_at) {
  auto m = manifest(run_id);
  if (m.closed()) throw Error(ErrorCode::RunClosed, "run '" + std::string(run_id) + "' is already closed");
  m.ended_at = std::move(ended_at);
  write_atomic(run_dir(run_id) / "manifest.json", to_json(m).dump(2) + "\n");
  return m;
}

LoadedRun RunStore::load_run(std::string_view run_id) const {
  LoadedRun out;
  out.manifest = manifest(run_id);
  const auto dir = run_dir(run_id);

  std::vector<fs::path> files;
  if (fs::exists(dir / "transcripts")) {
    for (const auto& e : fs::directory_iterator(dir / "transcripts")) {
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  bool unfinished = false;
  for (const auto& f : files) {
    std::optional<Conversation> conv;
    bool ended = false;
    for (const auto& line : complete_lines(read_file(f), out.skipped_records)) {
      try {
        const auto j = json::parse(line);
        const auto kind = j.at("record").get<std::string>();
        if (kind == "start") {
          conv.emplace(j.at("case_id").get<std::string>(), j.at("run_id").get<std::string>());
        } else if (kind == "turn" && conv && !ended) {
          conv->restore(turn_from_json(j));
        } else if (kind == "end" && conv && !ended) {
          const auto st = parse_terminal_state(j.at("terminal_state").get<std::string>());
          if (!st) throw Error(ErrorCode::MalformedRecord, "unknown terminal state");
          std::optional<std::string> failure;
          if (!j.at("failure").is_null()) failure = j.at("failure").get<std::string>();
          conv->finish(*st, failure);
          ended = true;
        } else {
          throw Error(ErrorCode::MalformedRecord, "record out of order");
        }
      } catch (const std::exception&) {
        ++out.skipped_records;
      }
    }
    if (!conv) continue;
    unfinished = unfinished || !ended;
    out.conversations.push_back(std::move(*conv));
  }
  std::sort(out.conversations.begin(), out.conversations.end(),
            [](const Conversation& a, const Conversation& b) { return a.vignette_id() < b.vignette_id(); });

  std::map<std::string, CaseJudgment> latest;
  if (const auto vpath = dir / "verdicts.jsonl"; fs::exists(vpath)) {
    for (const auto& line : complete_lines(read_file(vpath), out.skipped_records)) {
      try {
        auto j = case_judgment_from_json(json::parse(line));
        latest.insert_or_assign(j.case_id, j);
        out.verdict_log.push_back(std::move(j));
      } catch (const std::exception&) {
        ++out.skipped_records;
      }
    }
  }
  for (auto& [id, j] : latest) out.verdicts.push_back(std::move(j));

  for (auto f : {ReportFormat::Table, ReportFormat::Csv, ReportFormat::Markdown}) {
    const auto p = dir / ("report." + std::string(file_extension(f)));
    if (fs::exists(p)) out.reports[f] = read_file(p);
  }
  if (fs::exists(dir / "corpus.jsonl")) out.corpus = parse_corpus(read_file(dir / "corpus.jsonl"));
  if (fs::exists(dir / "baseline.tsv")) out.baseline = BaselineTable::parse(read_file(dir / "baseline.tsv"));

  out.partial = !out.manifest.closed() || out.skipped_records > 0 || unfinished;
  return out;
}

BenchmarkReport aggregate_run(const LoadedRun& run) {
  if (!run.corpus) throw Error(ErrorCode::CorruptManifest, "run '" + run.manifest.run_id + "' has no corpus snapshot");
  return aggregate(run.verdicts, run.conversations, *run.corpus, run.baseline.value_or(BaselineTable{}),
                   run.manifest.run_id);
}

std::vector<RunManifest> RunStore::list_runs() const {
  std::vector<RunManifest> out;
  if (!fs::exists(root_)) return out;
  for (const auto& e : fs::directory_iterator(root_)) {
    if (!e.is_directory() || !fs::exists(e.path() / "manifest.json")) continue;
    try {
      out.push_back(manifest(e.path().filename().string()));
    } catch (const Error&) {
      // unreadable manifests are left out of listings
    }
  }
  std::sort(out.begin(), out.end(), [](const RunManifest& a, const RunManifest& b) { return a.run_id < b.run_id; });
  return out;
}

}  // namespace vgbench
