#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vgbench {

/// Match rubric. M* are matches, N* are explicit non-matches.
enum class MatchRule { M1, M2, M3, M4, M5, N1, N2, N3, Unresolved };

std::string_view to_string(MatchRule r) noexcept;
/// Long descriptive name, e.g. "AlternativeTerminology".
std::string_view rule_title(MatchRule r) noexcept;
std::optional<MatchRule> parse_match_rule(std::string_view s);
constexpr bool is_match_rule(MatchRule r) noexcept { return r <= MatchRule::M5; }

struct MatchVerdict {
  MatchRule rule = MatchRule::Unresolved;

  bool is_match() const noexcept { return is_match_rule(rule); }
  bool resolved() const noexcept { return rule != MatchRule::Unresolved; }
  bool operator==(const MatchVerdict&) const = default;
};

enum class EdgeKind { Synonym, ParentOf, Causes, NearMatch, Overlap };

std::string_view to_string(EdgeKind k) noexcept;
std::optional<EdgeKind> parse_edge_kind(std::string_view s);

struct ConditionNode {
  std::string canonical;
  std::vector<std::string> synonyms;
};

struct ConditionEdge {
  EdgeKind kind;
  std::size_t from;
  std::size_t to;
};

/// Conditions and typed relations between them. Synonym edges merge nodes
/// into one equivalence class; parent_of (umbrella -> specific) must be
/// acyclic over classes. Immutable once built.
class ConditionGraph {
 public:
  ConditionGraph() = default;

  /// Builds and validates. Throws Error(InvalidGraph) on duplicate names,
  /// dangling edge ends or a parent_of cycle.
  ConditionGraph(std::vector<ConditionNode> nodes, std::vector<ConditionEdge> edges);

  /// Tab-separated records; see docs/knowledge-graph-format.md.
  static ConditionGraph parse(std::string_view tsv);
  static ConditionGraph load(const std::filesystem::path& path);

  const std::vector<ConditionNode>& nodes() const noexcept { return nodes_; }
  const std::vector<ConditionEdge>& edges() const noexcept { return edges_; }

  /// Node carrying `name` after normalization.
  std::optional<std::size_t> find(std::string_view name) const;

  /// Every known name, normalized.
  std::vector<std::string> names() const;

  /// Canonical name of the node carrying `name`.
  std::optional<std::string> canonical(std::string_view name) const;

  bool same_class(std::size_t a, std::size_t b) const;
  /// True when `a` is strictly below `b` through parent_of edges.
  bool is_descendant(std::size_t a, std::size_t b) const;
  bool has_edge(EdgeKind kind, std::size_t from, std::size_t to) const;

 private:
  std::size_t cls(std::size_t n) const { return class_of_[n]; }

  std::vector<ConditionNode> nodes_;
  std::vector<ConditionEdge> edges_;
  std::map<std::string, std::size_t> by_name_;
  std::vector<std::size_t> class_of_;
  // class -> child classes via parent_of
  std::vector<std::vector<std::size_t>> children_;
};

/// Case-fold, drop parentheticals and punctuation, collapse whitespace.
std::string normalize_condition(std::string_view name);

/// Rubric classification, first applicable rule in the order
/// M1 > M2 > M3 > M5 > N2 > N1 > N3. Names unknown to the graph and M4
/// descriptions are Unresolved. `gold_synonyms` are alternative names the
/// vignette itself lists for the gold diagnosis.
MatchVerdict match_diagnosis(std::string_view predicted, std::string_view gold, const ConditionGraph& kg,
                             const std::vector<std::string>& gold_synonyms = {});

}  // namespace vgbench
