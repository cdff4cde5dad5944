#ifndef TABKG_PROPOSER_HPP
#define TABKG_PROPOSER_HPP

#include <memory>
#include <string>
#include <vector>

#include "tabkg/graph.hpp"
#include "tabkg/table.hpp"

namespace tabkg {

struct Prompt {
    std::string text;
    std::string schema_hash;
    std::vector<std::string> column_names;
};

Prompt serialize_prompt(const std::vector<ColumnMeta>& metas);

// One relationship per line:
//   HIER <src> -> <tgt> | <rho>
//   MATH <tgt> = <expr> | <rho>
//   TEMP <src> < <tgt> | <rho>     (or <=)
//   SEM <tgt> IN {v1,v2,...} | <rho>
//   SEM <tgt> = <value> IF <lhs cmp rhs> | <rho>
// The confidence suffix is optional and defaults to 1.0.
struct ParseResult {
    std::vector<Edge> edges;
    std::size_t dropped = 0;
};

ParseResult parse_proposal(const std::string& raw,
                           const std::vector<ColumnMeta>& metas);

// Renders the edges of a graph in the response grammar. Mathematical and
// semantic-conditional edges that share a target and rule collapse back
// into a single line.
std::string render_proposal(const Graph& graph);

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string identifier() const = 0;
    virtual std::string complete(const Prompt& prompt, double temperature) = 0;
};

// Emits the ground-truth graph verbatim.
class PerfectStubProvider : public Provider {
public:
    PerfectStubProvider(std::string id, Graph truth);
    std::string identifier() const override { return id_; }
    std::string complete(const Prompt& prompt, double temperature) override;

private:
    std::string id_;
    Graph truth_;
};

// Ground truth minus each edge w.p. p/2, plus random well-formed spurious
// edges totaling round(p * |E|). Deterministic per seed.
class NoisyStubProvider : public Provider {
public:
    NoisyStubProvider(std::string id, Graph truth, double p, std::uint64_t seed,
                      const std::vector<ColumnMeta>& metas);
    std::string identifier() const override { return id_; }
    std::string complete(const Prompt& prompt, double temperature) override;

private:
    std::string id_;
    Graph truth_;
    double p_;
    std::uint64_t seed_;
    std::vector<ColumnMeta> metas_;
};

class SilentStubProvider : public Provider {
public:
    explicit SilentStubProvider(std::string id) : id_(std::move(id)) {}
    std::string identifier() const override { return id_; }
    std::string complete(const Prompt&, double) override { return ""; }

private:
    std::string id_;
};

// Generic HTTP JSON chat-completions client. The API key is read from the
// environment variable named in the config; excluded from CI.
class HttpProvider : public Provider {
public:
    HttpProvider(std::string id, std::string base_url, std::string model,
                 std::string key_env_var);
    std::string identifier() const override { return id_; }
    std::string complete(const Prompt& prompt, double temperature) override;

private:
    std::string id_;
    std::string base_url_;
    std::string model_;
    std::string key_env_var_;
};

struct ProposalRun {
    Graph graph;
    std::string provider_id;
    bool failed = false;
    std::string error;
    std::size_t dropped_lines = 0;
    std::string raw_response;
};

ProposalRun propose(Provider& provider, const Prompt& prompt,
                    const std::vector<ColumnMeta>& metas, double temperature);

// Eq-1 style vote: an edge survives iff proposed by >= threshold graphs.
// Confidence becomes the mean over proposers, the rule payload comes from
// the highest-confidence proposer, and votes records the count.
Graph majority_vote(const std::vector<Graph>& graphs, int threshold);

struct EnsembleConfig {
    struct Entry {
        std::string id;
        std::string type;  // "stub-perfect" | "stub-noisy" | "stub-silent" | "http"
        double noise_p = 0.2;
        std::uint64_t seed = 0;
        std::string truth_graph_path;
        std::string base_url;
        std::string model;
        std::string key_env_var;
    };
    std::vector<Entry> providers;
    std::vector<double> temperatures;  // one query per temperature if nonempty
    int pinned_threshold = 0;          // 0 = recompute ceil(K'/2) over successes
};

EnsembleConfig load_ensemble_config(const std::string& path);

std::vector<std::unique_ptr<Provider>> build_providers(
    const EnsembleConfig& config, const std::vector<ColumnMeta>& metas);

struct EnsembleResult {
    Graph candidate;
    std::vector<ProposalRun> runs;
    int threshold = 0;
};

// Queries every provider (sorted by identifier so the result is
// independent of completion order) and votes.
EnsembleResult run_ensemble(std::vector<std::unique_ptr<Provider>>& providers,
                            const Prompt& prompt,
                            const std::vector<ColumnMeta>& metas,
                            const EnsembleConfig& config);

}  // namespace tabkg

#endif
