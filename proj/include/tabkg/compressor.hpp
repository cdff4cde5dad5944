#ifndef TABKG_COMPRESSOR_HPP
#define TABKG_COMPRESSOR_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tabkg/graph.hpp"
#include "tabkg/table.hpp"

namespace tabkg {

// Deterministic reconstruction function for one dependent column.
struct Reconstructor {
    enum class Kind { Lookup, FormulaEval, TimeOffset, ConditionalAssign };

    Kind kind = Kind::Lookup;
    std::string target;
    ColumnKind target_kind = ColumnKind::Categorical;

    // Lookup: joint parent key (values joined with \x1f) -> target value.
    std::vector<std::string> lookup_sources;
    std::map<std::string, std::string> lookup_map;
    std::string lookup_fallback;  // modal target value

    // FormulaEval
    std::string formula;

    // TimeOffset
    std::string offset_base;
    std::string offset_column;
    std::int64_t min_offset_seconds = 0;  // 1 for strict '<' rules

    // ConditionalAssign: first matching condition wins.
    std::vector<std::pair<std::string, std::string>> conditions;  // (cmp expr, value)
    std::string default_value;
};

struct DerivedOffset {
    std::string offset_column;
    std::string base;
    std::string target;
    std::int64_t min_offset_seconds = 0;
};

struct CompressionPlan {
    std::vector<std::string> schema;  // original column order
    std::set<std::string> keep;
    std::set<std::string> compress;
    std::vector<DerivedOffset> derived_offsets;
    std::vector<Reconstructor> reconstructors;  // topological order

    std::string to_json_string() const;
    static CompressionPlan from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static CompressionPlan load(const std::string& path);
};

struct RoundTripReport {
    std::map<std::string, double> column_match_rate;
    std::size_t lookup_misses = 0;
    bool pass = false;
};

CompressionPlan build_plan(const Graph& validated, const Table& table);

Table compress(const Table& table, const CompressionPlan& plan);

// Applies reconstructors in topological order; lookup misses fall back to
// the fitted modal value and are counted.
Table decompress(const Table& compressed, const CompressionPlan& plan,
                 std::size_t* lookup_misses = nullptr);

RoundTripReport verify_roundtrip(const Table& table, const CompressionPlan& plan);

}  // namespace tabkg

#endif
