#include "vgbench/condition_graph.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vgbench/error.hpp"
#include "vgbench/text.hpp"

namespace vgbench {

namespace {

constexpr std::array<std::string_view, 9> kRuleIds = {"M1", "M2", "M3", "M4", "M5", "N1", "N2", "N3", "Unresolved"};
constexpr std::array<std::string_view, 9> kRuleTitles = {
    "ExactCorrespondence", "AlternativeTerminology", "IncreasedSpecificity",
    "EquivalentDescription", "DirectCausation", "NearMatchLessPrecise",
    "UmbrellaTerm", "SymptomaticOverlap", "Unresolved",
};
constexpr std::array<std::string_view, 5> kEdgeNames = {"synonym", "parent_of", "causes", "near_match", "overlap"};

std::size_t root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

bool symmetric(EdgeKind k) { return k == EdgeKind::Synonym || k == EdgeKind::NearMatch || k == EdgeKind::Overlap; }

}  // namespace

std::string_view to_string(MatchRule r) noexcept { return kRuleIds[static_cast<std::size_t>(r)]; }

std::string_view rule_title(MatchRule r) noexcept { return kRuleTitles[static_cast<std::size_t>(r)]; }

std::optional<MatchRule> parse_match_rule(std::string_view s) {
  for (std::size_t i = 0; i < kRuleIds.size(); ++i) {
    if (s == kRuleIds[i]) return static_cast<MatchRule>(i);
  }
  return std::nullopt;
}

std::string_view to_string(EdgeKind k) noexcept { return kEdgeNames[static_cast<std::size_t>(k)]; }

std::optional<EdgeKind> parse_edge_kind(std::string_view s) {
  for (std::size_t i = 0; i < kEdgeNames.size(); ++i) {
    if (s == kEdgeNames[i]) return static_cast<EdgeKind>(i);
  }
  return std::nullopt;
}

std::string normalize_condition(std::string_view name) { return text::normalize_name(name); }

ConditionGraph::ConditionGraph(std::vector<ConditionNode> nodes, std::vector<ConditionEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    std::vector<std::string> all{nodes_[i].canonical};
    all.insert(all.end(), nodes_[i].synonyms.begin(), nodes_[i].synonyms.end());
    for (const auto& n : all) {
      const auto key = normalize_condition(n);
      if (key.empty()) throw Error(ErrorCode::InvalidGraph, "empty condition name");
      const auto [it, fresh] = by_name_.emplace(key, i);
      if (!fresh && it->second != i) throw Error(ErrorCode::InvalidGraph, "duplicate condition name '" + n + "'");
    }
  }

  std::vector<std::size_t> parent(nodes_.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (const auto& e : edges_) {
    if (e.from >= nodes_.size() || e.to >= nodes_.size()) throw Error(ErrorCode::InvalidGraph, "edge end out of range");
    if (e.kind == EdgeKind::Synonym) parent[root(parent, e.from)] = root(parent, e.to);
  }
  class_of_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) class_of_[i] = root(parent, i);

  children_.assign(nodes_.size(), {});
  for (const auto& e : edges_) {
    if (e.kind != EdgeKind::ParentOf) continue;
    if (cls(e.from) == cls(e.to)) {
      throw Error(ErrorCode::InvalidGraph, "parent_of between synonyms: " + nodes_[e.from].canonical);
    }
    children_[cls(e.from)].push_back(cls(e.to));
  }

  // Cycle check over classes (0 = unseen, 1 = on stack, 2 = done).
  std::vector<int> state(nodes_.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t start = 0; start < nodes_.size(); ++start) {
    if (state[start] != 0) continue;
    stack.push_back({start, 0});
    state[start] = 1;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < children_[node].size()) {
        const auto child = children_[node][next++];
        if (state[child] == 1) {
          throw Error(ErrorCode::InvalidGraph, "parent_of cycle through " + nodes_[child].canonical);
        }
        if (state[child] == 0) {
          state[child] = 1;
          stack.push_back({child, 0});
        }
      } else {
        state[node] = 2;
        stack.pop_back();
      }
    }
  }
}

ConditionGraph ConditionGraph::parse(std::string_view tsv) {
  struct PendingEdge {
    std::size_t line;
    EdgeKind kind;
    std::string from;
    std::string to;
  };
  std::vector<ConditionNode> nodes;
  std::vector<PendingEdge> pending;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::InvalidGraph, "line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
    const auto fields = text::split(line, '\t');
    if (fields[0] == "node") {
      if (fields.size() < 2 || fields.size() > 3) fail("node record needs a name and optional synonyms");
      ConditionNode n{text::trim(fields[1]), {}};
      if (fields.size() == 3) {
        for (const auto& s : text::split(fields[2], '|')) {
          if (auto t = text::trim(s); !t.empty()) n.synonyms.push_back(t);
        }
      }
      nodes.push_back(std::move(n));
    } else if (fields[0] == "edge") {
      if (fields.size() != 4) fail("edge record needs kind, from and to");
      const auto kind = parse_edge_kind(fields[1]);
      if (!kind) fail("unknown edge kind '" + fields[1] + "'");
      pending.push_back({lineno, *kind, fields[2], fields[3]});
    } else {
      fail("unknown record type '" + fields[0] + "'");
    }
  }

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    index.emplace(normalize_condition(nodes[i].canonical), i);
    for (const auto& s : nodes[i].synonyms) index.emplace(normalize_condition(s), i);
  }
  std::vector<ConditionEdge> edges;
  for (const auto& p : pending) {
    const auto a = index.find(normalize_condition(p.from));
    const auto b = index.find(normalize_condition(p.to));
    if (a == index.end() || b == index.end()) {
      throw Error(ErrorCode::InvalidGraph, "line " + std::to_string(p.line) + ": edge names an unknown condition");
    }
    edges.push_back({p.kind, a->second, b->second});
  }
  return ConditionGraph(std::move(nodes), std::move(edges));
}

ConditionGraph ConditionGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read condition graph " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<std::size_t> ConditionGraph::find(std::string_view name) const {
  const auto it = by_name_.find(normalize_condition(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> ConditionGraph::names() const {
  std::vector<std::string> out;
  out.reserve(by_name_.size());
  for (const auto& [k, v] : by_name_) out.push_back(k);
  return out;
}

std::optional<std::string> ConditionGraph::canonical(std::string_view name) const {
  const auto n = find(name);
  if (!n) return std::nullopt;
  return nodes_[*n].canonical;
}

bool ConditionGraph::same_class(std::size_t a, std::size_t b) const { return cls(a) == cls(b); }

bool ConditionGraph::is_descendant(std::size_t a, std::size_t b) const {
  const auto target = cls(a);
  std::vector<std::size_t> todo{cls(b)};
  std::vector<bool> seen(nodes_.size(), false);
  while (!todo.empty()) {
    const auto c = todo.back();
    todo.pop_back();
    for (auto child : children_[c]) {
      if (child == target) return true;
      if (!seen[child]) {
        seen[child] = true;
        todo.push_back(child);
      }
    }
  }
  return false;
}

bool ConditionGraph::has_edge(EdgeKind kind, std::size_t from, std::size_t to) const {
  return std::any_of(edges_.begin(), edges_.end(), [&](const ConditionEdge& e) {
    if (e.kind != kind) return false;
    if (cls(e.from) == cls(from) && cls(e.to) == cls(to)) return true;
    return symmetric(kind) && cls(e.from) == cls(to) && cls(e.to) == cls(from);
  });
}

MatchVerdict match_diagnosis(std::string_view predicted, std::string_view gold, const ConditionGraph& kg,
                             const std::vector<std::string>& gold_synonyms) {
  const auto p = normalize_condition(predicted);
  const auto g = normalize_condition(gold);
  if (p.empty() || g.empty()) return {MatchRule::Unresolved};
  if (p == g) return {MatchRule::M1};
  for (const auto& s : gold_synonyms) {
    if (normalize_condition(s) == p) return {MatchRule::M2};
  }
  const auto pn = kg.find(p);
  auto gn = kg.find(g);
  for (auto it = gold_synonyms.begin(); !gn && it != gold_synonyms.end(); ++it) gn = kg.find(*it);
  if (!pn || !gn) return {MatchRule::Unresolved};
  if (kg.same_class(*pn, *gn)) return {MatchRule::M2};
  if (kg.is_descendant(*pn, *gn)) return {MatchRule::M3};
  if (kg.has_edge(EdgeKind::Causes, *pn, *gn)) return {MatchRule::M5};
  if (kg.is_descendant(*gn, *pn)) return {MatchRule::N2};
  if (kg.has_edge(EdgeKind::NearMatch, *pn, *gn)) return {MatchRule::N1};
  if (kg.has_edge(EdgeKind::Overlap, *pn, *gn)) return {MatchRule::N3};
  return {MatchRule::Unresolved};
}

}  // namespace vgbench
