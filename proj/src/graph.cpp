#include "tabkg/graph.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <stdexcept>

#include "json.hpp"

namespace tabkg {

std::string to_string(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::Hierarchical: return "hierarchical";
        case EdgeKind::Mathematical: return "mathematical";
        case EdgeKind::Temporal: return "temporal";
        case EdgeKind::Semantic: return "semantic";
    }
    return "hierarchical";
}

EdgeKind edge_kind_from_string(const std::string& s) {
    if (s == "hierarchical") return EdgeKind::Hierarchical;
    if (s == "mathematical") return EdgeKind::Mathematical;
    if (s == "temporal") return EdgeKind::Temporal;
    if (s == "semantic") return EdgeKind::Semantic;
    throw std::runtime_error("unknown edge kind: " + s);
}

std::string Edge::match_key() const {
    std::string key = source + "\x1f" + target + "\x1f" + to_string(kind);
    if (kind == EdgeKind::Mathematical) {
        if (const auto* f = std::get_if<FormulaRule>(&rule))
            key += "\x1f" + Expr::parse(f->expr).canonical();
    }
    return key;
}

bool rules_equivalent(const Rule& a, const Rule& b) {
    if (a.index() != b.index()) return false;
    if (const auto* fa = std::get_if<FormulaRule>(&a)) {
        const auto& fb = std::get<FormulaRule>(b);
        return Expr::parse(fa->expr).structurally_equal(Expr::parse(fb.expr));
    }
    if (const auto* ta = std::get_if<TemporalOrderRule>(&a)) {
        const auto& tb = std::get<TemporalOrderRule>(b);
        return ta->relation == tb.relation;
    }
    if (const auto* da = std::get_if<DomainSetRule>(&a)) {
        return da->allowed == std::get<DomainSetRule>(b).allowed;
    }
    if (const auto* ca = std::get_if<ConditionImpliesRule>(&a)) {
        const auto& cb = std::get<ConditionImpliesRule>(b);
        return ca->value == cb.value &&
               Comparison::parse(ca->condition).canonical() ==
                   Comparison::parse(cb.condition).canonical();
    }
    return true;  // HierMap
}

Graph::Graph(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {}

bool Graph::has_node(const std::string& name) const {
    return std::find(nodes_.begin(), nodes_.end(), name) != nodes_.end();
}

void Graph::insert_edge(const Edge& edge) {
    if (!has_node(edge.source)) throw std::runtime_error("unknown column: " + edge.source);
    if (!has_node(edge.target)) throw std::runtime_error("unknown column: " + edge.target);
    if (edge.source == edge.target && edge.kind != EdgeKind::Semantic)
        throw std::runtime_error("self-loop only allowed for semantic domain rules");
    std::string key = edge.match_key();
    for (auto& existing : edges_) {
        if (existing.match_key() == key) {
            if (edge.confidence > existing.confidence) existing = edge;
            return;
        }
    }
    edges_.push_back(edge);
}

std::vector<Edge> Graph::edges_into(const std::string& target) const {
    std::vector<Edge> out;
    for (const auto& e : edges_)
        if (e.target == target && !e.is_self_constraint()) out.push_back(e);
    return out;
}

namespace {

// Finds one directed cycle (self-loops excluded); returns the edge
// indices along it, or empty if the graph is acyclic.
std::vector<std::size_t> find_cycle(const std::vector<std::string>& nodes,
                                    const std::vector<Edge>& edges) {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (!edges[i].is_self_constraint()) out[edges[i].source].push_back(i);

    enum { White, Gray, Black };
    std::map<std::string, int> color;
    for (const auto& n : nodes) color[n] = White;

    std::vector<std::size_t> path;  // edge indices on the current DFS path

    std::function<bool(const std::string&)> dfs = [&](const std::string& node) -> bool {
        color[node] = Gray;
        for (std::size_t ei : out[node]) {
            const std::string& next = edges[ei].target;
            if (color[next] == Gray) {
                path.push_back(ei);
                // Trim the path to the cycle portion.
                std::size_t start = 0;
                for (std::size_t k = 0; k < path.size(); ++k)
                    if (edges[path[k]].source == next) start = k;
                path.erase(path.begin(), path.begin() + std::ptrdiff_t(start));
                return true;
            }
            if (color[next] == White) {
                path.push_back(ei);
                if (dfs(next)) return true;
                path.pop_back();
            }
        }
        color[node] = Black;
        return false;
    };

    for (const auto& n : nodes) {
        if (color[n] == White && dfs(n)) return path;
    }
    return {};
}

}  // namespace

bool Graph::is_acyclic() const {
    return find_cycle(nodes_, edges_).empty();
}

Graph Graph::to_dag() const {
    Graph out = *this;
    while (true) {
        std::vector<std::size_t> cycle = find_cycle(out.nodes_, out.edges_);
        if (cycle.empty()) return out;
        auto weight = [&](std::size_t i) {
            const Edge& e = out.edges_[i];
            return e.score.value_or(e.confidence);
        };
        std::size_t victim = cycle.front();
        for (std::size_t i : cycle) {
            double wi = weight(i), wv = weight(victim);
            auto key = [&](std::size_t k) {
                return std::make_pair(out.edges_[k].source, out.edges_[k].target);
            };
            if (wi < wv || (wi == wv && key(i) < key(victim))) victim = i;
        }
        out.edges_.erase(out.edges_.begin() + std::ptrdiff_t(victim));
    }
}

std::set<std::string> Graph::independent_set() const {
    std::set<std::string> keep(nodes_.begin(), nodes_.end());
    for (const auto& e : edges_)
        if (!e.is_self_constraint()) keep.erase(e.target);
    return keep;
}

std::vector<std::string> Graph::topological_order() const {
    std::map<std::string, int> in_degree;
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& n : nodes_) in_degree[n] = 0;
    for (const auto& e : edges_) {
        if (e.is_self_constraint()) continue;
        ++in_degree[e.target];
        out[e.source].push_back(e.target);
    }
    std::set<std::string> frontier;
    for (const auto& [node, deg] : in_degree)
        if (deg == 0) frontier.insert(node);
    std::vector<std::string> order;
    while (!frontier.empty()) {
        std::string node = *frontier.begin();
        frontier.erase(frontier.begin());
        order.push_back(node);
        for (const auto& next : out[node]) {
            if (--in_degree[next] == 0) frontier.insert(next);
        }
    }
    if (order.size() != nodes_.size())
        throw std::runtime_error("cycle detected in graph during topological sort");
    return order;
}

// --- serialization ---------------------------------------------------------

namespace {

nlohmann::json rule_to_json(const Rule& rule) {
    nlohmann::json j;
    if (std::holds_alternative<HierMapRule>(rule)) {
        j["type"] = "hier_map";
    } else if (const auto* f = std::get_if<FormulaRule>(&rule)) {
        j["type"] = "formula";
        j["expr"] = f->expr;
    } else if (const auto* t = std::get_if<TemporalOrderRule>(&rule)) {
        j["type"] = "temporal_order";
        j["relation"] = t->relation == TemporalRelation::Before ? "before" : "before_or_equal";
        if (!t->offset_target.empty()) j["offset_target"] = t->offset_target;
    } else if (const auto* d = std::get_if<DomainSetRule>(&rule)) {
        j["type"] = "domain_set";
        j["allowed"] = d->allowed;
    } else if (const auto* c = std::get_if<ConditionImpliesRule>(&rule)) {
        j["type"] = "condition_implies";
        j["condition"] = c->condition;
        j["value"] = c->value;
    }
    return j;
}

Rule rule_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "hier_map") return HierMapRule{};
    if (type == "formula") return FormulaRule{j.at("expr").get<std::string>()};
    if (type == "temporal_order") {
        TemporalOrderRule r;
        r.relation = j.at("relation").get<std::string>() == "before"
                         ? TemporalRelation::Before
                         : TemporalRelation::BeforeOrEqual;
        r.offset_target = j.value("offset_target", "");
        return r;
    }
    if (type == "domain_set") {
        DomainSetRule r;
        for (const auto& v : j.at("allowed")) r.allowed.insert(v.get<std::string>());
        if (r.allowed.empty()) throw std::runtime_error("domain set must be nonempty");
        return r;
    }
    if (type == "condition_implies") {
        return ConditionImpliesRule{j.at("condition").get<std::string>(),
                                    j.at("value").get<std::string>()};
    }
    throw std::runtime_error("unknown rule type: " + type);
}

}  // namespace

std::string Graph::to_json_string() const {
    nlohmann::json j;
    j["nodes"] = nodes_;
    j["edges"] = nlohmann::json::array();
    for (const auto& e : edges_) {
        nlohmann::json je;
        je["source"] = e.source;
        je["target"] = e.target;
        je["kind"] = to_string(e.kind);
        je["confidence"] = e.confidence;
        je["votes"] = e.votes;
        if (e.score) je["score"] = *e.score;
        je["rule"] = rule_to_json(e.rule);
        j["edges"].push_back(std::move(je));
    }
    return j.dump(2);
}

Graph Graph::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw std::runtime_error("graph parse error at byte " + std::to_string(err.byte) +
                                 ": " + err.what());
    }
    Graph g;
    for (const auto& n : j.at("nodes")) g.nodes_.push_back(n.get<std::string>());
    for (const auto& je : j.at("edges")) {
        Edge e;
        e.source = je.at("source").get<std::string>();
        e.target = je.at("target").get<std::string>();
        e.kind = edge_kind_from_string(je.at("kind").get<std::string>());
        e.confidence = je.at("confidence").get<double>();
        e.votes = je.value("votes", 0);
        if (je.contains("score")) e.score = je.at("score").get<double>();
        e.rule = rule_from_json(je.at("rule"));
        g.insert_edge(e);
    }
    return g;
}

void Graph::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << to_json_string() << '\n';
}

Graph Graph::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_string(text);
}

bool graphs_equal(const Graph& a, const Graph& b) {
    if (a.nodes() != b.nodes()) return false;
    if (a.edges().size() != b.edges().size()) return false;
    auto sorted_keys = [](const Graph& g) {
        std::vector<std::string> keys;
        for (const auto& e : g.edges()) {
            std::string k = e.match_key() + "|" + std::to_string(e.confidence) + "|" +
                            std::to_string(e.votes) + "|" +
                            (e.score ? std::to_string(*e.score) : "-");
            keys.push_back(k);
        }
        std::sort(keys.begin(), keys.end());
        return keys;
    };
    if (sorted_keys(a) != sorted_keys(b)) return false;
    for (const auto& ea : a.edges()) {
        bool found = false;
        for (const auto& eb : b.edges()) {
            if (ea.match_key() == eb.match_key() && rules_equivalent(ea.rule, eb.rule)) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace tabkg
