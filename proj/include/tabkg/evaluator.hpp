#ifndef TABKG_EVALUATOR_HPP
#define TABKG_EVALUATOR_HPP

#include <map>
#include <optional>
#include <string>

#include "tabkg/graph.hpp"
#include "tabkg/table.hpp"

namespace tabkg {

// Fidelity: column-wise density similarity.
// Numeric/timestamp columns: 100*(1 - two-sample KS statistic).
// Categorical columns: 100*(1 - total variation distance).
double density_score(const Table& real, const Table& synth,
                     std::map<std::string, double>* per_column = nullptr);

// Fidelity: pairwise association similarity. Pearson for numeric pairs,
// Cramer's V for categorical pairs, correlation ratio for mixed pairs.
// Score = 100*(1 - mean |delta| / 2), clipped to [0,100].
double correlation_score(const Table& real, const Table& synth,
                         std::map<std::string, double>* per_pair = nullptr);

// Consistency: fraction of synth rows whose (source,target) pair agrees
// with the modal map fitted on real, averaged over hierarchical edges.
std::optional<double> hcs(const Table& synth, const Graph& graph, const Table& real,
                          std::map<std::string, double>* per_edge = nullptr);

// Consistency: satisfaction rate of mathematical and temporal edges on
// synth, reusing validator tolerances.
std::optional<double> mdi(const Table& synth, const Graph& graph,
                          std::map<std::string, double>* per_edge = nullptr);

// Consistency: per-edge Jensen-Shannon similarity (base-2) between real
// and synth joint (source,target) distributions; numeric participants
// discretized into deciles fitted on real.
std::optional<double> dsi(const Table& real, const Table& synth, const Graph& graph,
                          std::map<std::string, double>* per_edge = nullptr);

// Privacy: fraction of synth rows strictly closer to train than to
// holdout under Gower-style distances; ties count one half. Ideal 50.
double dcr(const Table& train, const Table& holdout, const Table& synth);

// Privacy: 100*max(0, 1 - 2*(AUC - 0.5)) for a 5-fold cross-validated
// regularized logistic real-vs-synth classifier. Ideal 100.
double c2st(const Table& real, const Table& synth, std::uint64_t seed);

struct TstrResult {
    double auc = 0.0;
    double macro_f1 = 0.0;
};

// Utility: train a regularized logistic classifier on synth, evaluate
// on real. Multiclass uses one-vs-rest macro AUC.
TstrResult tstr(const Table& synth_train, const Table& real_test,
                const std::string& label, std::uint64_t seed);

struct EvalReport {
    double density = 0.0;
    double correlation = 0.0;
    std::optional<double> hcs;
    std::optional<double> mdi;
    std::optional<double> dsi;
    std::optional<double> dcr;
    std::optional<double> c2st;
    std::optional<TstrResult> tstr;

    std::map<std::string, double> density_per_column;
    std::map<std::string, double> correlation_per_pair;
    std::map<std::string, double> hcs_per_edge;
    std::map<std::string, double> mdi_per_edge;
    std::map<std::string, double> dsi_per_edge;

    std::string to_json_string() const;
    std::string to_text_table() const;
    void save(const std::string& path) const;
};

// Runs every metric whose inputs are available. train/holdout enable
// DCR; a label column enables TSTR.
EvalReport evaluate_all(const Table& real, const Table& synth, const Graph& graph,
                        const Table* train, const Table* holdout,
                        const std::string& label, std::uint64_t seed);

}  // namespace tabkg

#endif
