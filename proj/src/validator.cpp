#include "tabkg/validator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace tabkg {

namespace {

// Modal target per source value, tie broken by lexicographically
// smallest category so scoring is order-independent.
std::map<std::string, std::string> fit_modal_map(const Column& src, const Column& tgt,
                                                 std::size_t rows) {
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    for (std::size_t r = 0; r < rows; ++r) {
        if (src.is_missing(r) || tgt.is_missing(r)) continue;
        ++counts[src.category(r)][tgt.category(r)];
    }
    std::map<std::string, std::string> modal;
    for (const auto& [s, targets] : counts) {
        std::size_t best = 0;
        std::string value;
        for (const auto& [t, n] : targets) {
            if (n > best) {
                best = n;
                value = t;
            }
        }
        modal[s] = value;
    }
    return modal;
}

}  // namespace

double validate_hierarchical(const Edge& edge, const Table& table) {
    const Column& src = table.column(edge.source);
    const Column& tgt = table.column(edge.target);
    if (src.kind() != ColumnKind::Categorical || tgt.kind() != ColumnKind::Categorical)
        throw std::runtime_error("hierarchical edge requires categorical columns: " +
                                 edge.source + " -> " + edge.target);
    auto modal = fit_modal_map(src, tgt, table.row_count());
    std::size_t agree = 0, total = 0;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        if (src.is_missing(r) || tgt.is_missing(r)) continue;
        ++total;
        if (modal.at(src.category(r)) == tgt.category(r)) ++agree;
    }
    return total ? double(agree) / double(total) : 0.0;
}

double validate_mathematical(const Edge& edge, const Table& table) {
    const auto* formula = std::get_if<FormulaRule>(&edge.rule);
    if (!formula) throw std::runtime_error("mathematical edge carries no formula");
    Expr expr = Expr::parse(formula->expr);
    const Column& tgt = table.column(edge.target);
    if (tgt.kind() == ColumnKind::Categorical)
        throw std::runtime_error("formula target must be numeric: " + edge.target);
    std::vector<const Column*> parents;
    for (const auto& name : expr.variables()) {
        const Column& c = table.column(name);
        if (c.kind() == ColumnKind::Categorical)
            throw std::runtime_error("formula references non-numeric column: " + name);
        parents.push_back(&c);
    }

    std::size_t ok = 0, total = 0;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        if (tgt.is_missing(r)) continue;
        bool missing = false;
        for (const Column* p : parents)
            if (p->is_missing(r)) missing = true;
        if (missing) continue;
        auto value = expr.eval([&](const std::string& name) -> std::optional<double> {
            return table.column(name).numeric_value(r);
        });
        if (!value) continue;  // division by zero: excluded from denominator
        ++total;
        double actual = tgt.numeric_value(r);
        if (std::abs(actual - *value) <= kFormulaAtol + kFormulaRtol * std::abs(actual))
            ++ok;
    }
    return total ? double(ok) / double(total) : 0.0;
}

double validate_temporal(const Edge& edge, const Table& table) {
    const auto* rule = std::get_if<TemporalOrderRule>(&edge.rule);
    if (!rule) throw std::runtime_error("temporal edge carries no ordering rule");
    const Column& src = table.column(edge.source);
    const Column& tgt = table.column(edge.target);
    if (src.kind() != ColumnKind::Timestamp || tgt.kind() != ColumnKind::Timestamp)
        throw std::runtime_error("temporal edge requires timestamp columns: " +
                                 edge.source + " -> " + edge.target);
    std::size_t ok = 0, total = 0;
    bool strict = rule->relation == TemporalRelation::Before;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        if (src.is_missing(r) || tgt.is_missing(r)) continue;
        ++total;
        std::int64_t a = src.timestamp(r), b = tgt.timestamp(r);
        if (strict ? a < b : a <= b) ++ok;
    }
    return total ? double(ok) / double(total) : 0.0;
}

double validate_semantic(const Edge& edge, const Table& table) {
    const Column& tgt = table.column(edge.target);
    if (const auto* domain = std::get_if<DomainSetRule>(&edge.rule)) {
        std::size_t ok = 0, total = 0;
        for (std::size_t r = 0; r < table.row_count(); ++r) {
            if (tgt.is_missing(r)) continue;
            ++total;
            if (domain->allowed.count(tgt.category(r))) ++ok;
        }
        return total ? double(ok) / double(total) : 0.0;
    }
    if (const auto* cond = std::get_if<ConditionImpliesRule>(&edge.rule)) {
        Comparison cmp = Comparison::parse(cond->condition);
        std::size_t holds = 0, ok = 0;
        for (std::size_t r = 0; r < table.row_count(); ++r) {
            if (tgt.is_missing(r)) continue;
            auto result = cmp.eval([&](const std::string& name) -> std::optional<double> {
                const Column& c = table.column(name);
                if (c.is_missing(r)) return std::nullopt;
                return c.numeric_value(r);
            });
            if (!result || !*result) continue;
            ++holds;
            if (tgt.category(r) == cond->value) ++ok;
        }
        // A condition that never triggers is unsupported by the data.
        return holds ? double(ok) / double(holds) : 0.0;
    }
    throw std::runtime_error("malformed semantic rule payload");
}

double validate_edge(const Edge& edge, const Table& table) {
    switch (edge.kind) {
        case EdgeKind::Hierarchical: return validate_hierarchical(edge, table);
        case EdgeKind::Mathematical: return validate_mathematical(edge, table);
        case EdgeKind::Temporal: return validate_temporal(edge, table);
        case EdgeKind::Semantic: return validate_semantic(edge, table);
    }
    return 0.0;
}

std::pair<Graph, ValidationReport> prune(const Graph& candidate, const Table& table,
                                         double theta) {
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::runtime_error("theta must lie in (0,1]");
    ValidationReport report;
    report.theta = theta;

    Graph survivors(candidate.nodes());
    for (const auto& edge : candidate.edges()) {
        EdgeScore es;
        es.edge = edge;
        es.sigma = validate_edge(edge, table);
        es.edge.score = es.sigma;
        es.kept = es.sigma >= theta;

        if (edge.kind == EdgeKind::Hierarchical) {
            const Column& src = table.column(edge.source);
            std::set<std::int32_t> distinct;
            std::size_t present = 0;
            for (std::size_t r = 0; r < table.row_count(); ++r) {
                if (src.is_missing(r)) continue;
                ++present;
                distinct.insert(src.category_id(r));
            }
            es.trivial_fd = present > 0 &&
                            double(distinct.size()) > kTrivialFdFraction * double(present);
        }

        if (es.kept) {
            survivors.insert_edge(es.edge);
        } else {
            report.pruned.push_back(edge);
        }
        report.scores.push_back(std::move(es));
    }

    std::size_t total = candidate.edges().size();
    report.hallucination_rate =
        total ? double(report.pruned.size()) / double(total) : 0.0;
    return {survivors.to_dag(), std::move(report)};
}

std::string ValidationReport::to_json_string() const {
    nlohmann::json j;
    j["theta"] = theta;
    j["hallucination_rate"] = hallucination_rate;
    j["edges"] = nlohmann::json::array();
    for (const auto& es : scores) {
        nlohmann::json je;
        je["source"] = es.edge.source;
        je["target"] = es.edge.target;
        je["kind"] = to_string(es.edge.kind);
        je["sigma"] = es.sigma;
        je["kept"] = es.kept;
        if (es.trivial_fd) je["trivial_fd"] = true;
        j["edges"].push_back(std::move(je));
    }
    return j.dump(2);
}

void ValidationReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << to_json_string() << '\n';
}

DiscoveryScore score_discovery(const Graph& predicted, const Graph& truth) {
    std::set<std::string> pred_nodes(predicted.nodes().begin(), predicted.nodes().end());
    std::set<std::string> truth_nodes(truth.nodes().begin(), truth.nodes().end());
    if (pred_nodes != truth_nodes)
        throw std::runtime_error("discovery scoring requires identical node sets");

    auto triple = [](const Edge& e) {
        return e.source + "\x1f" + e.target + "\x1f" + to_string(e.kind);
    };
    std::map<std::string, Edge> truth_by_key;
    for (const auto& e : truth.edges()) truth_by_key.emplace(triple(e), e);

    DiscoveryScore score;
    std::set<std::string> hit;
    for (const auto& e : predicted.edges()) {
        auto it = truth_by_key.find(triple(e));
        if (it != truth_by_key.end()) {
            if (hit.insert(it->first).second) score.matched.push_back(e);
        } else {
            score.spurious.push_back(e);
        }
    }
    for (const auto& [key, e] : truth_by_key)
        if (!hit.count(key)) score.missed.push_back(e);

    // Predicted edge count collapses per-parent expansions to triples.
    std::set<std::string> pred_triples;
    for (const auto& e : predicted.edges()) pred_triples.insert(triple(e));

    double matched = double(score.matched.size());
    if (!pred_triples.empty()) score.precision = matched / double(pred_triples.size());
    if (!truth_by_key.empty()) score.recall = matched / double(truth_by_key.size());
    double pr = score.precision + score.recall;
    score.f1 = pr > 0 ? 2.0 * score.precision * score.recall / pr : 0.0;
    return score;
}

}  // namespace tabkg
