#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>

#include "doctest.h"
#include "tabkg/table.hpp"
#include "tabkg/validator.hpp"

using namespace tabkg;

namespace {

Edge hier(const std::string& s, const std::string& t) {
    Edge e;
    e.source = s;
    e.target = t;
    e.kind = EdgeKind::Hierarchical;
    return e;
}

Edge math(const std::string& s, const std::string& t, const std::string& expr) {
    Edge e;
    e.source = s;
    e.target = t;
    e.kind = EdgeKind::Mathematical;
    e.rule = FormulaRule{expr};
    return e;
}

Edge temporal(const std::string& s, const std::string& t, TemporalRelation rel) {
    Edge e;
    e.source = s;
    e.target = t;
    e.kind = EdgeKind::Temporal;
    e.rule = TemporalOrderRule{rel, ""};
    return e;
}

}  // namespace

TEST_CASE("hierarchical validation counts modal agreement") {
    Table t({{"city", "", ColumnKind::Categorical},
             {"state", "", ColumnKind::Categorical}});
    // city a maps to x (5 rows, one deviation), city b maps to y (4 rows)
    for (int i = 0; i < 5; ++i) t.append_row_from_text({"a", "x"});
    for (int i = 0; i < 4; ++i) t.append_row_from_text({"b", "y"});
    t.append_row_from_text({"a", "z"});
    CHECK(validate_hierarchical(hier("city", "state"), t) == doctest::Approx(0.9));

    Table clean({{"city", "", ColumnKind::Categorical},
                 {"state", "", ColumnKind::Categorical}});
    for (int i = 0; i < 20; ++i)
        clean.append_row_from_text({"c" + std::to_string(i % 4), "s" + std::to_string(i % 2)});
    CHECK(validate_hierarchical(hier("city", "state"), clean) == 1.0);

    // type mismatch is a hard error, not a low score
    Table bad({{"city", "", ColumnKind::Categorical},
               {"qty", "", ColumnKind::Numeric}});
    bad.append_row_from_text({"a", "1"});
    CHECK_THROWS(validate_hierarchical(hier("city", "qty"), bad));
}

TEST_CASE("mathematical validation with tolerance") {
    Table t({{"qty", "", ColumnKind::Numeric},
             {"price", "", ColumnKind::Numeric},
             {"sales", "", ColumnKind::Numeric}});
    for (int i = 0; i < 92; ++i) {
        double qty = 1.0 + i % 7, price = 2.5 + 0.5 * (i % 3);
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.6f", qty * price);
        t.append_row_from_text({std::to_string(qty), std::to_string(price), buf});
    }
    for (int i = 0; i < 8; ++i) t.append_row_from_text({"2", "3", "100"});
    CHECK(validate_mathematical(math("qty", "sales", "qty * price"), t) ==
          doctest::Approx(0.92));

    // rounding within relative tolerance still counts
    Table rounded({{"qty", "", ColumnKind::Numeric},
                   {"sales", "", ColumnKind::Numeric}});
    rounded.append_row_from_text({"3", "9.0000001"});
    CHECK(validate_mathematical(math("qty", "sales", "qty * 3"), rounded) == 1.0);

    // division by zero drops the row from the denominator
    Table div({{"a", "", ColumnKind::Numeric},
               {"b", "", ColumnKind::Numeric},
               {"c", "", ColumnKind::Numeric}});
    div.append_row_from_text({"6", "2", "3"});
    div.append_row_from_text({"6", "0", "999"});
    CHECK(validate_mathematical(math("a", "c", "a / b"), div) == 1.0);

    CHECK_THROWS(validate_mathematical(hier("qty", "sales"), t));
}

TEST_CASE("temporal validation distinguishes strict and non-strict") {
    Table t({{"t1", "", ColumnKind::Timestamp}, {"t2", "", ColumnKind::Timestamp}});
    t.append_row_from_text({"2021-01-01 00:00:00", "2021-01-02 00:00:00"});
    t.append_row_from_text({"2021-01-01 00:00:00", "2021-01-01 00:00:00"});
    t.append_row_from_text({"2021-01-03 00:00:00", "2021-01-02 00:00:00"});
    t.append_row_from_text({"2021-01-04 00:00:00", "2021-01-09 12:30:00"});
    CHECK(validate_temporal(temporal("t1", "t2", TemporalRelation::Before), t) ==
          doctest::Approx(0.5));
    CHECK(validate_temporal(temporal("t1", "t2", TemporalRelation::BeforeOrEqual), t) ==
          doctest::Approx(0.75));
}

TEST_CASE("semantic validation") {
    Table t({{"mode", "", ColumnKind::Categorical},
             {"days", "", ColumnKind::Numeric},
             {"flag", "", ColumnKind::Categorical}});
    t.append_row_from_text({"Standard", "5", "1"});
    t.append_row_from_text({"Express", "1", "0"});
    t.append_row_from_text({"Standard", "4", "1"});
    t.append_row_from_text({"Bogus", "6", "0"});

    Edge dom;
    dom.source = dom.target = "mode";
    dom.kind = EdgeKind::Semantic;
    dom.rule = DomainSetRule{{"Standard", "Express"}};
    CHECK(validate_semantic(dom, t) == doctest::Approx(0.75));

    Edge cond;
    cond.source = "days";
    cond.target = "flag";
    cond.kind = EdgeKind::Semantic;
    cond.rule = ConditionImpliesRule{"days > 3", "1"};
    // condition fires on rows 0, 2, 3; the flag agrees on two of them
    CHECK(validate_semantic(cond, t) == doctest::Approx(2.0 / 3.0));

    // a condition that never fires has no support
    cond.rule = ConditionImpliesRule{"days > 100", "1"};
    CHECK(validate_semantic(cond, t) == 0.0);
}

TEST_CASE("prune keeps high-sigma edges and reports the rest") {
    Table t({{"city", "", ColumnKind::Categorical},
             {"state", "", ColumnKind::Categorical},
             {"qty", "", ColumnKind::Numeric},
             {"sales", "", ColumnKind::Numeric}});
    for (int i = 0; i < 10; ++i) {
        std::string city = "c" + std::to_string(i % 3);
        std::string state = "s" + std::to_string(i % 3 % 2);
        double qty = 1.0 + i;
        t.append_row_from_text({city, state, std::to_string(qty),
                                std::to_string(i < 5 ? qty * 2 : qty * 7)});
    }

    Graph candidate({"city", "state", "qty", "sales"});
    candidate.insert_edge(hier("city", "state"));               // sigma 1.0
    candidate.insert_edge(math("qty", "sales", "qty * 2"));     // sigma 0.5

    auto [kept, report] = prune(candidate, t, 0.9);
    CHECK(kept.edges().size() == 1);
    CHECK(kept.edges()[0].kind == EdgeKind::Hierarchical);
    CHECK(*kept.edges()[0].score == 1.0);
    CHECK(report.pruned.size() == 1);
    CHECK(report.hallucination_rate == doctest::Approx(0.5));
    CHECK(report.scores.size() == 2);

    CHECK_THROWS(prune(candidate, t, 0.0));
    CHECK_THROWS(prune(candidate, t, 1.5));
}

TEST_CASE("prune breaks cycles among survivors") {
    Table t({{"a", "", ColumnKind::Categorical}, {"b", "", ColumnKind::Categorical}});
    // a perfect bijection validates in both directions
    for (int i = 0; i < 8; ++i) {
        std::string v = std::to_string(i % 4);
        t.append_row_from_text({"a" + v, "b" + v});
    }
    Graph candidate({"a", "b"});
    candidate.insert_edge(hier("a", "b"));
    candidate.insert_edge(hier("b", "a"));
    auto [kept, report] = prune(candidate, t, 0.9);
    CHECK(kept.is_acyclic());
    CHECK(kept.edges().size() == 1);
    // both directions scored 1.0; pruning happened for acyclicity, not sigma
    CHECK(report.pruned.empty());
}

TEST_CASE("near-unique sources are flagged as trivial dependencies") {
    Table t({{"order_id", "", ColumnKind::Categorical},
             {"city", "", ColumnKind::Categorical}});
    for (int i = 0; i < 50; ++i)
        t.append_row_from_text({"o" + std::to_string(i), "c" + std::to_string(i % 3)});
    Graph candidate({"order_id", "city"});
    candidate.insert_edge(hier("order_id", "city"));
    auto [kept, report] = prune(candidate, t, 0.9);
    REQUIRE(report.scores.size() == 1);
    CHECK(report.scores[0].sigma == 1.0);
    CHECK(report.scores[0].trivial_fd);

    // a genuinely low-cardinality source is not flagged
    Graph rev({"order_id", "city"});
    rev.insert_edge(hier("city", "order_id"));
    auto [kept2, report2] = prune(rev, t, 0.01);
    CHECK(!report2.scores[0].trivial_fd);
}

TEST_CASE("discovery scoring") {
    std::vector<std::string> nodes = {"a", "b", "c", "d", "e"};
    Graph truth(nodes);
    truth.insert_edge(hier("a", "b"));
    truth.insert_edge(hier("b", "c"));
    truth.insert_edge(hier("c", "d"));
    truth.insert_edge(hier("d", "e"));

    Graph pred(nodes);
    pred.insert_edge(hier("a", "b"));
    pred.insert_edge(hier("b", "c"));
    pred.insert_edge(hier("c", "d"));
    pred.insert_edge(hier("a", "e"));  // spurious

    DiscoveryScore s = score_discovery(pred, truth);
    CHECK(s.precision == doctest::Approx(0.75));
    CHECK(s.recall == doctest::Approx(0.75));
    CHECK(s.f1 == doctest::Approx(0.75));
    CHECK(s.matched.size() == 3);
    CHECK(s.missed.size() == 1);
    CHECK(s.spurious.size() == 1);

    CHECK(score_discovery(truth, truth).f1 == 1.0);

    Graph other({"a", "b"});
    CHECK_THROWS(score_discovery(other, truth));
}

TEST_CASE("validation report serializes") {
    Table t({{"a", "", ColumnKind::Categorical}, {"b", "", ColumnKind::Categorical}});
    t.append_row_from_text({"x", "y"});
    Graph candidate({"a", "b"});
    candidate.insert_edge(hier("a", "b"));
    auto [kept, report] = prune(candidate, t, 0.9);
    std::string j = report.to_json_string();
    CHECK(j.find("\"hallucination_rate\"") != std::string::npos);
    CHECK(j.find("\"sigma\"") != std::string::npos);
}
