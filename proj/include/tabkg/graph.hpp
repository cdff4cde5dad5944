#ifndef TABKG_GRAPH_HPP
#define TABKG_GRAPH_HPP

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tabkg/expr.hpp"

namespace tabkg {

enum class EdgeKind { Hierarchical, Mathematical, Temporal, Semantic };

std::string to_string(EdgeKind kind);
EdgeKind edge_kind_from_string(const std::string& s);

enum class TemporalRelation { Before, BeforeOrEqual };

// Rule payloads. HierMap carries no payload: the lookup is fitted from
// data at compression time.
struct HierMapRule {};

struct FormulaRule {
    std::string expr;  // arithmetic expression over parent column names
};

struct TemporalOrderRule {
    TemporalRelation relation = TemporalRelation::Before;
    std::string offset_target;  // optional derived-column name
};

struct DomainSetRule {
    std::set<std::string> allowed;
};

struct ConditionImpliesRule {
    std::string condition;  // comparison expression
    std::string value;      // category implied when the condition holds
};

using Rule = std::variant<HierMapRule, FormulaRule, TemporalOrderRule,
                          DomainSetRule, ConditionImpliesRule>;

struct Edge {
    std::string source;
    std::string target;
    EdgeKind kind = EdgeKind::Hierarchical;
    double confidence = 1.0;
    Rule rule = HierMapRule{};
    int votes = 0;
    std::optional<double> score;

    // Domain-set rules constrain a single column; they are stored as
    // self-loops and ignored by all topology operations.
    bool is_self_constraint() const { return source == target; }

    // Match key for voting and discovery scoring: (source, target, kind),
    // plus structural formula equality for mathematical edges.
    std::string match_key() const;
};

bool rules_equivalent(const Rule& a, const Rule& b);

class Graph {
public:
    Graph() = default;
    explicit Graph(std::vector<std::string> nodes);

    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    bool has_node(const std::string& name) const;

    // Adds an edge; a (source,target,kind) duplicate keeps the higher
    // confidence. Mathematical edges with different formulas coexist.
    void insert_edge(const Edge& edge);

    std::vector<Edge> edges_into(const std::string& target) const;

    bool is_acyclic() const;

    // Breaks cycles by repeatedly dropping the in-cycle edge with lowest
    // score (confidence when unscored), ties by lexicographic (source,target).
    Graph to_dag() const;

    // Nodes with zero incoming (non-self-loop) edges.
    std::set<std::string> independent_set() const;

    // Kahn's method with a lexicographically ordered frontier.
    std::vector<std::string> topological_order() const;

    void save(const std::string& path) const;
    static Graph load(const std::string& path);

    std::string to_json_string() const;
    static Graph from_json_string(const std::string& text);

private:
    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
};

bool graphs_equal(const Graph& a, const Graph& b);

}  // namespace tabkg

#endif
