#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "tabkg/proposer.hpp"

using namespace tabkg;

namespace {

std::vector<ColumnMeta> metas() {
    return {{"city", "customer city", ColumnKind::Categorical},
            {"state", "customer state", ColumnKind::Categorical},
            {"qty", "units ordered", ColumnKind::Numeric},
            {"price", "unit price", ColumnKind::Numeric},
            {"sales", "line total", ColumnKind::Numeric},
            {"order_date", "order placed", ColumnKind::Timestamp},
            {"ship_date", "order shipped", ColumnKind::Timestamp},
            {"flag", "late flag", ColumnKind::Categorical}};
}

Graph truth_graph() {
    std::vector<std::string> names;
    for (const auto& m : metas()) names.push_back(m.name);
    Graph g(names);
    Edge h;
    h.source = "city";
    h.target = "state";
    h.kind = EdgeKind::Hierarchical;
    g.insert_edge(h);
    for (const char* parent : {"qty", "price"}) {
        Edge m;
        m.source = parent;
        m.target = "sales";
        m.kind = EdgeKind::Mathematical;
        m.rule = FormulaRule{"qty * price"};
        g.insert_edge(m);
    }
    Edge t;
    t.source = "order_date";
    t.target = "ship_date";
    t.kind = EdgeKind::Temporal;
    t.rule = TemporalOrderRule{TemporalRelation::Before, ""};
    g.insert_edge(t);
    Edge d;
    d.source = d.target = "flag";
    d.kind = EdgeKind::Semantic;
    d.rule = DomainSetRule{{"0", "1"}};
    g.insert_edge(d);
    Edge c;
    c.source = "ship_date";
    c.target = "flag";
    c.kind = EdgeKind::Semantic;
    c.rule = ConditionImpliesRule{"ship_date - order_date > 259200", "1"};
    g.insert_edge(c);
    Edge c2 = c;
    c2.source = "order_date";
    g.insert_edge(c2);
    return g;
}

struct ThrowingProvider : Provider {
    std::string identifier() const override { return "broken"; }
    std::string complete(const Prompt&, double) override {
        throw std::runtime_error("connection refused");
    }
};

}  // namespace

TEST_CASE("prompt serialization") {
    Prompt p = serialize_prompt(metas());
    CHECK(p.text.find("city: customer city") != std::string::npos);
    CHECK(p.text.find("HIER <source> -> <target>") != std::string::npos);
    CHECK(p.column_names.size() == 8);
    CHECK(p.schema_hash.size() == 16);

    CHECK(serialize_prompt(metas()).schema_hash == p.schema_hash);
    auto changed = metas();
    changed[0].description = "something else";
    CHECK(serialize_prompt(changed).schema_hash != p.schema_hash);

    CHECK_THROWS(serialize_prompt({{"only", "", ColumnKind::Numeric}}));
}

TEST_CASE("parsing each grammar form") {
    auto m = metas();

    auto r = parse_proposal("HIER city -> state | 0.9\n", m);
    REQUIRE(r.edges.size() == 1);
    CHECK(r.edges[0].kind == EdgeKind::Hierarchical);
    CHECK(r.edges[0].confidence == 0.9);
    CHECK(r.dropped == 0);

    // confidence suffix is optional and defaults to 1
    r = parse_proposal("HIER city -> state\n", m);
    REQUIRE(r.edges.size() == 1);
    CHECK(r.edges[0].confidence == 1.0);

    // MATH expands to one edge per referenced parent
    r = parse_proposal("MATH sales = qty * price | 0.8\n", m);
    REQUIRE(r.edges.size() == 2);
    for (const auto& e : r.edges) {
        CHECK(e.kind == EdgeKind::Mathematical);
        CHECK(e.target == "sales");
        CHECK(std::get<FormulaRule>(e.rule).expr == "qty * price");
    }

    r = parse_proposal("TEMP order_date < ship_date | 1\n", m);
    REQUIRE(r.edges.size() == 1);
    CHECK(std::get<TemporalOrderRule>(r.edges[0].rule).relation ==
          TemporalRelation::Before);
    r = parse_proposal("TEMP order_date <= ship_date\n", m);
    REQUIRE(r.edges.size() == 1);
    CHECK(std::get<TemporalOrderRule>(r.edges[0].rule).relation ==
          TemporalRelation::BeforeOrEqual);

    r = parse_proposal("SEM flag IN {0,1} | 0.95\n", m);
    REQUIRE(r.edges.size() == 1);
    CHECK(r.edges[0].is_self_constraint());
    CHECK(std::get<DomainSetRule>(r.edges[0].rule).allowed ==
          std::set<std::string>{"0", "1"});

    // conditional rules expand like MATH: one edge per condition variable
    r = parse_proposal("SEM flag = 1 IF ship_date - order_date > 259200 | 0.9\n", m);
    REQUIRE(r.edges.size() == 2);
    for (const auto& e : r.edges) {
        CHECK(e.target == "flag");
        CHECK(std::get<ConditionImpliesRule>(e.rule).value == "1");
    }
}

TEST_CASE("malformed lines are dropped, not fatal") {
    auto m = metas();
    std::string raw =
        "HIER city -> state | 0.9\n"
        "\n"
        "HIER city -> nosuchcolumn\n"
        "HIER city -> city\n"
        "MATH sales = qty +\n"
        "MATH sales = sales * 2\n"
        "MATH nosuch = qty * 2\n"
        "TEMP order_date ship_date\n"
        "SEM flag IN {}\n"
        "SEM flag = 1 IF flag > 0\n"
        "FROB a -> b\n"
        "TEMP order_date < ship_date\n";
    auto r = parse_proposal(raw, m);
    CHECK(r.edges.size() == 2);
    CHECK(r.dropped == 9);

    // an out-of-range confidence invalidates the whole line
    r = parse_proposal("HIER city -> state | 1.7\n", m);
    CHECK(r.edges.empty());
    CHECK(r.dropped == 1);
}

TEST_CASE("render and parse are inverse") {
    Graph truth = truth_graph();
    std::string rendered = render_proposal(truth);
    // multi-parent rules collapse to single lines
    CHECK(std::count(rendered.begin(), rendered.end(), '\n') == 5);
    auto r = parse_proposal(rendered, metas());
    CHECK(r.dropped == 0);
    Graph back(truth.nodes());
    for (const auto& e : r.edges) back.insert_edge(e);
    CHECK(graphs_equal(truth, back));
}

TEST_CASE("majority vote") {
    auto m = metas();
    Graph truth = truth_graph();
    std::vector<std::string> names;
    for (const auto& meta : m) names.push_back(meta.name);

    // the shared edge appears in all five graphs with varying confidence;
    // a second edge only twice
    double rhos[5] = {0.8, 0.9, 1.0, 0.9, 0.9};
    std::vector<Graph> graphs;
    for (int i = 0; i < 5; ++i) {
        Graph g(names);
        Edge e;
        e.source = "city";
        e.target = "state";
        e.kind = EdgeKind::Hierarchical;
        e.confidence = rhos[i];
        g.insert_edge(e);
        if (i < 2) {
            Edge f;
            f.source = "state";
            f.target = "city";
            f.kind = EdgeKind::Hierarchical;
            f.confidence = 1.0;
            g.insert_edge(f);
        }
        graphs.push_back(g);
    }
    Graph voted = majority_vote(graphs, 3);
    REQUIRE(voted.edges().size() == 1);
    CHECK(voted.edges()[0].source == "city");
    CHECK(voted.edges()[0].votes == 5);
    CHECK(voted.edges()[0].confidence == doctest::Approx(0.90));

    // threshold 2 admits the minority edge as well
    CHECK(majority_vote(graphs, 2).edges().size() == 2);
    CHECK_THROWS(majority_vote({}, 1));
}

TEST_CASE("mathematical edges vote by formula, not just endpoints") {
    std::vector<std::string> names = {"qty", "price", "sales"};
    auto make = [&](const std::string& expr) {
        Graph g(names);
        Edge e;
        e.source = "qty";
        e.target = "sales";
        e.kind = EdgeKind::Mathematical;
        e.rule = FormulaRule{expr};
        g.insert_edge(e);
        return g;
    };
    // two proposers agree on the formula, one differs structurally
    Graph voted = majority_vote({make("qty * price"), make("qty*price"),
                                 make("qty + price")},
                                2);
    REQUIRE(voted.edges().size() == 1);
    CHECK(Expr::parse(std::get<FormulaRule>(voted.edges()[0].rule).expr)
              .structurally_equal(Expr::parse("qty * price")));
}

TEST_CASE("perfect stub reproduces the truth") {
    Graph truth = truth_graph();
    PerfectStubProvider provider("perfect", truth);
    Prompt prompt = serialize_prompt(metas());
    ProposalRun run = propose(provider, prompt, metas(), 0.0);
    CHECK(!run.failed);
    CHECK(run.dropped_lines == 0);
    CHECK(graphs_equal(run.graph, truth));
}

TEST_CASE("noisy stub is deterministic and exact at p=0") {
    Graph truth = truth_graph();
    Prompt prompt = serialize_prompt(metas());

    NoisyStubProvider clean("clean", truth, 0.0, 7, metas());
    CHECK(graphs_equal(propose(clean, prompt, metas(), 0.0).graph, truth));

    NoisyStubProvider a("noisy", truth, 0.4, 7, metas());
    NoisyStubProvider b("noisy", truth, 0.4, 7, metas());
    CHECK(a.complete(prompt, 0.0) == b.complete(prompt, 0.0));

    NoisyStubProvider other_seed("noisy", truth, 0.4, 8, metas());
    CHECK(a.complete(prompt, 0.0) != other_seed.complete(prompt, 0.0));
}

TEST_CASE("ensemble skips failed providers and recomputes the threshold") {
    Graph truth = truth_graph();
    Prompt prompt = serialize_prompt(metas());

    std::vector<std::unique_ptr<Provider>> providers;
    providers.push_back(std::make_unique<PerfectStubProvider>("a-perfect", truth));
    providers.push_back(std::make_unique<ThrowingProvider>());
    providers.push_back(std::make_unique<PerfectStubProvider>("z-perfect", truth));

    EnsembleConfig config;
    EnsembleResult result = run_ensemble(providers, prompt, metas(), config);
    CHECK(result.runs.size() == 3);
    CHECK(result.threshold == 1);  // ceil(2/2) over the two successes
    int failures = 0;
    for (const auto& r : result.runs) failures += r.failed ? 1 : 0;
    CHECK(failures == 1);
    // votes/confidence are rewritten by the vote, so compare edge identity
    REQUIRE(result.candidate.edges().size() == truth.edges().size());
    for (const auto& e : result.candidate.edges()) {
        bool found = false;
        for (const auto& t : truth.edges())
            if (t.match_key() == e.match_key()) found = true;
        CHECK(found);
        CHECK(e.votes == 2);
    }

    // all-failed is a hard error
    std::vector<std::unique_ptr<Provider>> broken;
    broken.push_back(std::make_unique<ThrowingProvider>());
    CHECK_THROWS(run_ensemble(broken, prompt, metas(), config));
}

TEST_CASE("ensemble majority filters stub noise") {
    Graph truth = truth_graph();
    Prompt prompt = serialize_prompt(metas());

    std::vector<std::unique_ptr<Provider>> providers;
    providers.push_back(std::make_unique<PerfectStubProvider>("p0", truth));
    providers.push_back(
        std::make_unique<NoisyStubProvider>("p1", truth, 0.2, 11, metas()));
    providers.push_back(
        std::make_unique<NoisyStubProvider>("p2", truth, 0.2, 12, metas()));

    EnsembleConfig config;
    EnsembleResult result = run_ensemble(providers, prompt, metas(), config);
    CHECK(result.threshold == 2);
    // spurious edges are seed-specific, so none should reach two votes
    for (const auto& e : result.candidate.edges()) {
        bool in_truth = false;
        for (const auto& t : truth.edges())
            if (t.match_key() == e.match_key()) in_truth = true;
        CHECK(in_truth);
    }
}
