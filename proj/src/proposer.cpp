#include "tabkg/proposer.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "tabkg/rng.hpp"

namespace tabkg {

namespace {

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

std::string format_confidence(double rho) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", rho);
    return buf;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Prompt serialize_prompt(const std::vector<ColumnMeta>& metas) {
    if (metas.size() < 2)
        throw std::runtime_error("prompt serialization needs at least 2 columns");
    std::ostringstream out;
    out << "You are given the columns of a tabular dataset, one per line as\n"
           "\"name: description\". Identify the operational relationships\n"
           "between columns and output one relationship per line using exactly\n"
           "this grammar (confidence in [0,1] is optional and defaults to 1):\n"
           "  HIER <source> -> <target> | <confidence>\n"
           "  MATH <target> = <arithmetic expression over column names> | <confidence>\n"
           "  TEMP <source> < <target> | <confidence>\n"
           "  TEMP <source> <= <target> | <confidence>\n"
           "  SEM <target> IN {value1,value2,...} | <confidence>\n"
           "  SEM <target> = <value> IF <comparison expression> | <confidence>\n"
           "Output only relationship lines, nothing else.\n\nColumns:\n";
    std::string schema;
    Prompt prompt;
    for (const auto& m : metas) {
        out << m.name << ": " << m.description << "\n";
        schema += m.name + "\x1f" + m.description + "\x1f" + to_string(m.kind) + "\n";
        prompt.column_names.push_back(m.name);
    }
    prompt.text = out.str();
    prompt.schema_hash = fnv1a_hex(schema);
    return prompt;
}

ParseResult parse_proposal(const std::string& raw,
                           const std::vector<ColumnMeta>& metas) {
    std::set<std::string> known;
    for (const auto& m : metas) known.insert(m.name);

    ParseResult result;
    std::istringstream lines(raw);
    std::string line;
    while (std::getline(lines, line)) {
        line = trim(line);
        if (line.empty()) continue;

        // Split off the optional "| rho" suffix.
        double rho = 1.0;
        std::size_t bar = line.rfind('|');
        std::string body = line;
        if (bar != std::string::npos) {
            auto conf = parse_number(trim(line.substr(bar + 1)));
            if (conf && *conf >= 0.0 && *conf <= 1.0) {
                rho = *conf;
                body = trim(line.substr(0, bar));
            }
        }

        std::vector<Edge> parsed;
        bool ok = false;
        try {
            if (body.rfind("HIER ", 0) == 0) {
                std::string rest = body.substr(5);
                std::size_t arrow = rest.find("->");
                if (arrow != std::string::npos) {
                    Edge e;
                    e.source = trim(rest.substr(0, arrow));
                    e.target = trim(rest.substr(arrow + 2));
                    e.kind = EdgeKind::Hierarchical;
                    e.confidence = rho;
                    e.rule = HierMapRule{};
                    if (known.count(e.source) && known.count(e.target) &&
                        e.source != e.target) {
                        parsed.push_back(e);
                        ok = true;
                    }
                }
            } else if (body.rfind("MATH ", 0) == 0) {
                std::string rest = body.substr(5);
                std::size_t eq = rest.find('=');
                if (eq != std::string::npos) {
                    std::string target = trim(rest.substr(0, eq));
                    std::string expr_text = trim(rest.substr(eq + 1));
                    Expr expr = Expr::parse(expr_text);
                    bool vars_ok = known.count(target) && !expr.variables().empty();
                    for (const auto& v : expr.variables())
                        if (!known.count(v) || v == target) vars_ok = false;
                    if (vars_ok) {
                        for (const auto& parent : expr.variables()) {
                            Edge e;
                            e.source = parent;
                            e.target = target;
                            e.kind = EdgeKind::Mathematical;
                            e.confidence = rho;
                            e.rule = FormulaRule{expr_text};
                            parsed.push_back(e);
                        }
                        ok = true;
                    }
                }
            } else if (body.rfind("TEMP ", 0) == 0) {
                std::string rest = body.substr(5);
                std::size_t le = rest.find("<=");
                std::size_t lt = rest.find('<');
                TemporalRelation rel;
                std::string src, tgt;
                if (le != std::string::npos) {
                    rel = TemporalRelation::BeforeOrEqual;
                    src = trim(rest.substr(0, le));
                    tgt = trim(rest.substr(le + 2));
                } else if (lt != std::string::npos) {
                    rel = TemporalRelation::Before;
                    src = trim(rest.substr(0, lt));
                    tgt = trim(rest.substr(lt + 1));
                } else {
                    src.clear();
                }
                if (!src.empty() && known.count(src) && known.count(tgt) && src != tgt) {
                    Edge e;
                    e.source = src;
                    e.target = tgt;
                    e.kind = EdgeKind::Temporal;
                    e.confidence = rho;
                    e.rule = TemporalOrderRule{rel, ""};
                    parsed.push_back(e);
                    ok = true;
                }
            } else if (body.rfind("SEM ", 0) == 0) {
                std::string rest = body.substr(4);
                std::size_t in_pos = rest.find(" IN ");
                std::size_t if_pos = rest.find(" IF ");
                if (in_pos != std::string::npos && if_pos == std::string::npos) {
                    std::string target = trim(rest.substr(0, in_pos));
                    std::string set_text = trim(rest.substr(in_pos + 4));
                    if (known.count(target) && set_text.size() >= 2 &&
                        set_text.front() == '{' && set_text.back() == '}') {
                        DomainSetRule r;
                        std::string inner = set_text.substr(1, set_text.size() - 2);
                        std::istringstream items(inner);
                        std::string item;
                        while (std::getline(items, item, ',')) {
                            item = trim(item);
                            if (!item.empty()) r.allowed.insert(item);
                        }
                        if (!r.allowed.empty()) {
                            Edge e;
                            e.source = target;  // domain rules are self-constraints
                            e.target = target;
                            e.kind = EdgeKind::Semantic;
                            e.confidence = rho;
                            e.rule = r;
                            parsed.push_back(e);
                            ok = true;
                        }
                    }
                } else if (if_pos != std::string::npos) {
                    std::size_t eq = rest.find('=');
                    if (eq != std::string::npos && eq < if_pos) {
                        std::string target = trim(rest.substr(0, eq));
                        std::string value = trim(rest.substr(eq + 1, if_pos - eq - 1));
                        std::string cond_text = trim(rest.substr(if_pos + 4));
                        Comparison cond = Comparison::parse(cond_text);
                        bool vars_ok = known.count(target) && !value.empty() &&
                                       !cond.variables().empty();
                        for (const auto& v : cond.variables())
                            if (!known.count(v) || v == target) vars_ok = false;
                        if (vars_ok) {
                            for (const auto& parent : cond.variables()) {
                                Edge e;
                                e.source = parent;
                                e.target = target;
                                e.kind = EdgeKind::Semantic;
                                e.confidence = rho;
                                e.rule = ConditionImpliesRule{cond_text, value};
                                parsed.push_back(e);
                            }
                            ok = true;
                        }
                    }
                }
            }
        } catch (const std::exception&) {
            ok = false;
        }

        if (ok) {
            for (const auto& e : parsed) result.edges.push_back(e);
        } else {
            ++result.dropped;
        }
    }
    return result;
}

std::string render_proposal(const Graph& graph) {
    // Group multi-parent rules back into single lines.
    std::vector<std::string> lines;
    std::set<std::string> emitted;
    for (const auto& e : graph.edges()) {
        std::string out;
        std::string dedup_key;
        if (e.kind == EdgeKind::Hierarchical) {
            out = "HIER " + e.source + " -> " + e.target;
            dedup_key = out;
        } else if (e.kind == EdgeKind::Mathematical) {
            const auto& f = std::get<FormulaRule>(e.rule);
            out = "MATH " + e.target + " = " + f.expr;
            dedup_key = "MATH " + e.target + " = " + Expr::parse(f.expr).canonical();
        } else if (e.kind == EdgeKind::Temporal) {
            const auto& t = std::get<TemporalOrderRule>(e.rule);
            out = "TEMP " + e.source +
                  (t.relation == TemporalRelation::Before ? " < " : " <= ") + e.target;
            dedup_key = out;
        } else {
            if (const auto* d = std::get_if<DomainSetRule>(&e.rule)) {
                out = "SEM " + e.target + " IN {";
                bool first = true;
                for (const auto& v : d->allowed) {
                    if (!first) out += ',';
                    out += v;
                    first = false;
                }
                out += '}';
                dedup_key = out;
            } else {
                const auto& c = std::get<ConditionImpliesRule>(e.rule);
                out = "SEM " + e.target + " = " + c.value + " IF " + c.condition;
                dedup_key = "SEM " + e.target + " = " + c.value + " IF " +
                            Comparison::parse(c.condition).canonical();
            }
        }
        if (emitted.insert(dedup_key).second)
            lines.push_back(out + " | " + format_confidence(e.confidence));
    }
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    return text;
}

PerfectStubProvider::PerfectStubProvider(std::string id, Graph truth)
    : id_(std::move(id)), truth_(std::move(truth)) {}

std::string PerfectStubProvider::complete(const Prompt&, double) {
    return render_proposal(truth_);
}

NoisyStubProvider::NoisyStubProvider(std::string id, Graph truth, double p,
                                     std::uint64_t seed,
                                     const std::vector<ColumnMeta>& metas)
    : id_(std::move(id)),
      truth_(std::move(truth)),
      p_(p),
      seed_(seed),
      metas_(metas) {}

std::string NoisyStubProvider::complete(const Prompt&, double temperature) {
    // Temperature is folded into the seed so same-model ensembles at
    // different temperatures produce distinct deterministic graphs.
    Rng rng(seed_ ^ std::uint64_t(temperature * 1000.0 + 0.5) * 0x9e3779b9ULL);

    Graph proposal(truth_.nodes());
    std::set<std::string> truth_keys;
    for (const auto& e : truth_.edges()) truth_keys.insert(e.match_key());
    for (const auto& e : truth_.edges()) {
        if (rng.uniform() < p_ / 2.0) continue;  // drop
        proposal.insert_edge(e);
    }

    // Spurious edges: random well-formed triples not present in the truth.
    std::size_t want = std::size_t(std::llround(p_ * double(truth_.edges().size())));
    std::size_t made = 0, attempts = 0;
    while (made < want && attempts < 1000) {
        ++attempts;
        Edge e;
        std::size_t si = rng.below(metas_.size());
        std::size_t ti = rng.below(metas_.size());
        if (si == ti) continue;
        const ColumnMeta& src = metas_[si];
        const ColumnMeta& tgt = metas_[ti];
        e.source = src.name;
        e.target = tgt.name;
        e.confidence = 0.5 + 0.5 * rng.uniform();
        switch (rng.below(3)) {
            case 0:
                if (src.kind != ColumnKind::Categorical ||
                    tgt.kind != ColumnKind::Categorical)
                    continue;
                e.kind = EdgeKind::Hierarchical;
                e.rule = HierMapRule{};
                break;
            case 1: {
                if (src.kind != ColumnKind::Numeric || tgt.kind != ColumnKind::Numeric)
                    continue;
                e.kind = EdgeKind::Mathematical;
                char buf[96];
                std::snprintf(buf, sizeof buf, "%s * %.3f", src.name.c_str(),
                              0.1 + 3.0 * rng.uniform());
                e.rule = FormulaRule{buf};
                break;
            }
            default:
                if (src.kind != ColumnKind::Timestamp ||
                    tgt.kind != ColumnKind::Timestamp)
                    continue;
                e.kind = EdgeKind::Temporal;
                e.rule = TemporalOrderRule{TemporalRelation::Before, ""};
                break;
        }
        if (truth_keys.count(e.match_key())) continue;
        proposal.insert_edge(e);
        ++made;
    }
    return render_proposal(proposal);
}

HttpProvider::HttpProvider(std::string id, std::string base_url, std::string model,
                           std::string key_env_var)
    : id_(std::move(id)),
      base_url_(std::move(base_url)),
      model_(std::move(model)),
      key_env_var_(std::move(key_env_var)) {}

ProposalRun propose(Provider& provider, const Prompt& prompt,
                    const std::vector<ColumnMeta>& metas, double temperature) {
    ProposalRun run;
    run.provider_id = provider.identifier();
    std::vector<std::string> names;
    for (const auto& m : metas) names.push_back(m.name);
    run.graph = Graph(names);
    try {
        run.raw_response = provider.complete(prompt, temperature);
    } catch (const std::exception& e) {
        run.failed = true;
        run.error = e.what();
        return run;
    }
    ParseResult parsed = parse_proposal(run.raw_response, metas);
    run.dropped_lines = parsed.dropped;
    for (const auto& e : parsed.edges) run.graph.insert_edge(e);
    return run;
}

Graph majority_vote(const std::vector<Graph>& graphs, int threshold) {
    if (graphs.empty()) throw std::runtime_error("majority vote needs at least one graph");

    struct Tally {
        int count = 0;
        double rho_sum = 0.0;
        Edge best;  // highest-confidence proposer carries the rule payload
    };
    std::map<std::string, Tally> tallies;  // ordered map for determinism
    for (const auto& g : graphs) {
        for (const auto& e : g.edges()) {
            Tally& t = tallies[e.match_key()];
            if (t.count == 0 || e.confidence > t.best.confidence) t.best = e;
            ++t.count;
            t.rho_sum += e.confidence;
        }
    }

    Graph out(graphs.front().nodes());
    for (const auto& [key, t] : tallies) {
        if (t.count < threshold) continue;
        Edge e = t.best;
        e.confidence = t.rho_sum / double(t.count);
        e.votes = t.count;
        out.insert_edge(e);
    }
    return out;
}

EnsembleConfig load_ensemble_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open provider config: " + path);
    nlohmann::json j = nlohmann::json::parse(in);

    EnsembleConfig config;
    const nlohmann::json& providers = j.is_array() ? j : j.at("providers");
    for (const auto& jp : providers) {
        EnsembleConfig::Entry e;
        e.id = jp.at("id").get<std::string>();
        e.type = jp.at("type").get<std::string>();
        const auto params = jp.value("params", nlohmann::json::object());
        e.noise_p = params.value("p", 0.2);
        e.seed = params.value("seed", std::uint64_t(0));
        e.truth_graph_path = params.value("truth_graph", "");
        e.base_url = params.value("base_url", "");
        e.model = params.value("model", "");
        e.key_env_var = params.value("key_env_var", "");
        config.providers.push_back(std::move(e));
    }
    if (!j.is_array()) {
        if (j.contains("temperatures"))
            config.temperatures = j.at("temperatures").get<std::vector<double>>();
        config.pinned_threshold = j.value("threshold", 0);
    }
    return config;
}

std::vector<std::unique_ptr<Provider>> build_providers(
    const EnsembleConfig& config, const std::vector<ColumnMeta>& metas) {
    std::vector<std::unique_ptr<Provider>> out;
    for (const auto& e : config.providers) {
        if (e.type == "stub-perfect") {
            out.push_back(std::make_unique<PerfectStubProvider>(
                e.id, Graph::load(e.truth_graph_path)));
        } else if (e.type == "stub-noisy") {
            out.push_back(std::make_unique<NoisyStubProvider>(
                e.id, Graph::load(e.truth_graph_path), e.noise_p, e.seed, metas));
        } else if (e.type == "stub-silent") {
            out.push_back(std::make_unique<SilentStubProvider>(e.id));
        } else if (e.type == "http") {
            out.push_back(std::make_unique<HttpProvider>(e.id, e.base_url, e.model,
                                                         e.key_env_var));
        } else {
            throw std::runtime_error("unknown provider type: " + e.type);
        }
    }
    return out;
}

EnsembleResult run_ensemble(std::vector<std::unique_ptr<Provider>>& providers,
                            const Prompt& prompt,
                            const std::vector<ColumnMeta>& metas,
                            const EnsembleConfig& config) {
    EnsembleResult result;

    struct Query {
        Provider* provider;
        double temperature;
        std::string sort_key;
    };
    std::vector<Query> queries;
    for (auto& p : providers) {
        if (config.temperatures.empty()) {
            queries.push_back({p.get(), 0.0, p->identifier()});
        } else {
            for (double t : config.temperatures) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%s@%.3f", p->identifier().c_str(), t);
                queries.push_back({p.get(), t, buf});
            }
        }
    }
    std::sort(queries.begin(), queries.end(),
              [](const Query& a, const Query& b) { return a.sort_key < b.sort_key; });

    std::vector<Graph> successes;
    for (auto& q : queries) {
        ProposalRun run = propose(*q.provider, prompt, metas, q.temperature);
        run.provider_id = q.sort_key;
        if (!run.failed) successes.push_back(run.graph);
        result.runs.push_back(std::move(run));
    }
    if (successes.empty())
        throw std::runtime_error("all providers failed; no graphs to vote on");

    result.threshold = config.pinned_threshold > 0
                           ? config.pinned_threshold
                           : int((successes.size() + 1) / 2);
    result.candidate = majority_vote(successes, result.threshold);
    return result;
}

}  // namespace tabkg
