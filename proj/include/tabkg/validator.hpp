#ifndef TABKG_VALIDATOR_HPP
#define TABKG_VALIDATOR_HPP

#include <string>
#include <vector>

#include "tabkg/graph.hpp"
#include "tabkg/table.hpp"

namespace tabkg {

// Row-level tolerance for formula checks; real financial data carries
// rounding, exact equality would prune true formulas.
inline constexpr double kFormulaAtol = 1e-6;
inline constexpr double kFormulaRtol = 1e-4;

// A source column is a near-unique key when it has more than this
// fraction of distinct values; its FDs are flagged trivial.
inline constexpr double kTrivialFdFraction = 0.95;

double validate_hierarchical(const Edge& edge, const Table& table);
double validate_mathematical(const Edge& edge, const Table& table);
double validate_temporal(const Edge& edge, const Table& table);
double validate_semantic(const Edge& edge, const Table& table);

// Dispatches on edge kind.
double validate_edge(const Edge& edge, const Table& table);

struct EdgeScore {
    Edge edge;
    double sigma = 0.0;
    bool kept = false;
    bool trivial_fd = false;
};

struct ValidationReport {
    std::vector<EdgeScore> scores;
    std::vector<Edge> pruned;
    double hallucination_rate = 0.0;
    double theta = 0.9;

    std::string to_json_string() const;
    void save(const std::string& path) const;
};

// Scores every candidate edge, keeps sigma >= theta, then breaks cycles.
std::pair<Graph, ValidationReport> prune(const Graph& candidate, const Table& table,
                                         double theta);

struct DiscoveryScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<Edge> matched;
    std::vector<Edge> missed;
    std::vector<Edge> spurious;
};

DiscoveryScore score_discovery(const Graph& predicted, const Graph& truth);

}  // namespace tabkg

#endif
