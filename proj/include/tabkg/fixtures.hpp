#ifndef TABKG_FIXTURES_HPP
#define TABKG_FIXTURES_HPP

#include <map>
#include <string>

#include "tabkg/graph.hpp"
#include "tabkg/table.hpp"

namespace tabkg {

// Recipe for a synthetic "real" table with known embedded relationships.
// noise maps a dependent column name to its per-row violation
// probability; absent columns default to 0.
struct FixtureSpec {
    std::string recipe = "mini-retail";
    std::size_t n_rows = 5000;
    std::uint64_t seed = 1;
    std::map<std::string, double> noise;
};

struct FixtureResult {
    Table table;
    Graph truth;  // ground-truth graph, edge scores imply 1 - noise
};

// Built-in recipes: "mini-retail", "mini-procurement".
FixtureResult generate_fixture(const FixtureSpec& spec);

}  // namespace tabkg

#endif
