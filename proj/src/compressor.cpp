#include "tabkg/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "tabkg/validator.hpp"

namespace tabkg {

namespace {

constexpr char kKeySep = '\x1f';

std::string joint_key(const Table& table, const std::vector<std::string>& sources,
                      std::size_t row, bool& missing) {
    std::string key;
    for (const auto& s : sources) {
        const Column& col = table.column(s);
        if (col.is_missing(row)) {
            missing = true;
            return key;
        }
        if (!key.empty()) key += kKeySep;
        key += col.category(row);
    }
    return key;
}

std::string modal_value(const Column& col, std::size_t rows) {
    std::map<std::string, std::size_t> counts;
    for (std::size_t r = 0; r < rows; ++r) {
        if (col.is_missing(r)) continue;
        ++counts[col.category(r)];
    }
    std::string best;
    std::size_t best_n = 0;
    for (const auto& [v, n] : counts) {
        if (n > best_n) {
            best_n = n;
            best = v;
        }
    }
    return best;
}

double edge_weight(const Edge& e) { return e.score.value_or(e.confidence); }

}  // namespace

CompressionPlan build_plan(const Graph& validated, const Table& table) {
    CompressionPlan plan;
    for (const auto& m : table.metas()) plan.schema.push_back(m.name);

    std::set<std::string> dependents;
    for (const auto& e : validated.edges())
        if (!e.is_self_constraint()) dependents.insert(e.target);
    for (const auto& name : plan.schema) {
        if (dependents.count(name))
            plan.compress.insert(name);
        else
            plan.keep.insert(name);
    }

    for (const auto& target : validated.topological_order()) {
        if (!plan.compress.count(target)) continue;
        std::vector<Edge> incoming = validated.edges_into(target);
        std::stable_sort(incoming.begin(), incoming.end(),
                         [](const Edge& a, const Edge& b) {
                             return edge_weight(a) > edge_weight(b);
                         });

        Reconstructor rec;
        rec.target = target;
        rec.target_kind = table.metas()[table.column_index(target)].kind;

        auto has_kind = [&](EdgeKind k) {
            return std::any_of(incoming.begin(), incoming.end(),
                               [&](const Edge& e) { return e.kind == k; });
        };

        if (has_kind(EdgeKind::Mathematical)) {
            // Exactness beats lookup when a column has mixed incoming edges.
            rec.kind = Reconstructor::Kind::FormulaEval;
            for (const auto& e : incoming) {
                if (e.kind == EdgeKind::Mathematical) {
                    rec.formula = std::get<FormulaRule>(e.rule).expr;
                    break;
                }
            }
        } else if (has_kind(EdgeKind::Hierarchical)) {
            rec.kind = Reconstructor::Kind::Lookup;
            for (const auto& e : incoming)
                if (e.kind == EdgeKind::Hierarchical)
                    rec.lookup_sources.push_back(e.source);
            std::sort(rec.lookup_sources.begin(), rec.lookup_sources.end());

            const Column& tgt = table.column(target);
            std::map<std::string, std::map<std::string, std::size_t>> counts;
            for (std::size_t r = 0; r < table.row_count(); ++r) {
                if (tgt.is_missing(r)) continue;
                bool missing = false;
                std::string key = joint_key(table, rec.lookup_sources, r, missing);
                if (missing) continue;
                ++counts[key][tgt.category(r)];
            }
            for (const auto& [key, values] : counts) {
                std::size_t best = 0;
                std::string v;
                for (const auto& [value, n] : values) {
                    if (n > best) {
                        best = n;
                        v = value;
                    }
                }
                rec.lookup_map[key] = v;
            }
            rec.lookup_fallback = modal_value(tgt, table.row_count());
        } else if (has_kind(EdgeKind::Temporal)) {
            rec.kind = Reconstructor::Kind::TimeOffset;
            const Edge* best = nullptr;
            for (const auto& e : incoming)
                if (e.kind == EdgeKind::Temporal && !best) best = &e;
            rec.offset_base = best->source;
            rec.offset_column = target + "__offset";
            const auto& rule = std::get<TemporalOrderRule>(best->rule);
            rec.min_offset_seconds = rule.relation == TemporalRelation::Before ? 1 : 0;
            plan.derived_offsets.push_back(
                {rec.offset_column, rec.offset_base, target, rec.min_offset_seconds});
        } else {
            // Semantic condition rules, in validation order; first match wins.
            rec.kind = Reconstructor::Kind::ConditionalAssign;
            std::set<std::string> seen;
            for (const auto& e : validated.edges()) {
                if (e.target != target || e.is_self_constraint()) continue;
                if (const auto* c = std::get_if<ConditionImpliesRule>(&e.rule)) {
                    std::string key = c->condition + kKeySep + c->value;
                    if (seen.insert(key).second)
                        rec.conditions.emplace_back(c->condition, c->value);
                }
            }
            if (rec.conditions.empty())
                throw std::runtime_error("no usable reconstruction rule for column: " +
                                         target);
            // Default comes from the rows no condition fires on; the
            // global mode would leak the conditional value itself.
            std::vector<Comparison> compiled;
            for (const auto& [cond, value] : rec.conditions)
                compiled.push_back(Comparison::parse(cond));
            const Column& tgt = table.column(target);
            std::map<std::string, std::size_t> rest;
            for (std::size_t r = 0; r < table.row_count(); ++r) {
                if (tgt.is_missing(r)) continue;
                bool fired = false;
                for (const auto& cmp : compiled) {
                    auto res = cmp.eval([&](const std::string& name)
                                            -> std::optional<double> {
                        const Column& c = table.column(name);
                        if (c.is_missing(r)) return std::nullopt;
                        return c.numeric_value(r);
                    });
                    if (res && *res) {
                        fired = true;
                        break;
                    }
                }
                if (!fired) ++rest[tgt.category(r)];
            }
            std::size_t best = 0;
            for (const auto& [v, n] : rest) {
                if (n > best) {
                    best = n;
                    rec.default_value = v;
                }
            }
            if (rest.empty())
                rec.default_value = modal_value(tgt, table.row_count());
        }
        plan.reconstructors.push_back(std::move(rec));
    }
    return plan;
}

Table compress(const Table& table, const CompressionPlan& plan) {
    std::vector<std::string> kept;
    for (const auto& name : plan.schema)
        if (plan.keep.count(name)) kept.push_back(name);
    Table out = table.select_columns(kept);

    std::vector<ColumnMeta> metas = out.metas();
    for (const auto& d : plan.derived_offsets)
        metas.push_back({d.offset_column, "derived temporal offset in seconds",
                         ColumnKind::Numeric});

    Table with_offsets(metas);
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        std::vector<std::string> cells;
        for (const auto& name : kept)
            cells.push_back(table.column(name).cell_text(r));
        for (const auto& d : plan.derived_offsets) {
            const Column& base = table.column(d.base);
            const Column& tgt = table.column(d.target);
            if (base.is_missing(r) || tgt.is_missing(r)) {
                cells.push_back("");
            } else {
                cells.push_back(std::to_string(tgt.timestamp(r) - base.timestamp(r)));
            }
        }
        with_offsets.append_row_from_text(cells);
    }
    return with_offsets;
}

Table decompress(const Table& compressed, const CompressionPlan& plan,
                 std::size_t* lookup_misses) {
    for (const auto& name : plan.keep)
        if (!compressed.has_column(name))
            throw std::runtime_error("compressed table missing kept column: " + name);
    for (const auto& d : plan.derived_offsets)
        if (!compressed.has_column(d.offset_column))
            throw std::runtime_error("compressed table missing offset column: " +
                                     d.offset_column);

    // Working table: kept + offsets + dependents, filled in topological order.
    std::vector<ColumnMeta> metas;
    for (const auto& m : compressed.metas()) metas.push_back(m);
    for (const auto& rec : plan.reconstructors)
        metas.push_back({rec.target, "", rec.target_kind});
    Table work(metas);

    const std::size_t rows = compressed.row_count();
    for (std::size_t c = 0; c < compressed.column_count(); ++c) {
        Column& dst = work.column_mut(c);
        const Column& src = compressed.column(c);
        for (std::size_t r = 0; r < rows; ++r) {
            if (src.is_missing(r)) {
                dst.push_missing();
            } else if (src.kind() == ColumnKind::Numeric) {
                dst.push_number(src.number(r));
            } else if (src.kind() == ColumnKind::Timestamp) {
                dst.push_timestamp(src.timestamp(r));
            } else {
                dst.push_category(src.category(r));
            }
        }
    }
    work.set_row_count(rows);

    std::size_t misses = 0;
    for (const auto& rec : plan.reconstructors) {
        Column& out = work.column_mut(rec.target);
        switch (rec.kind) {
            case Reconstructor::Kind::Lookup: {
                for (std::size_t r = 0; r < rows; ++r) {
                    bool missing = false;
                    std::string key = joint_key(work, rec.lookup_sources, r, missing);
                    if (missing) {
                        out.push_category(rec.lookup_fallback);
                        ++misses;
                        continue;
                    }
                    auto it = rec.lookup_map.find(key);
                    if (it == rec.lookup_map.end()) {
                        out.push_category(rec.lookup_fallback);
                        ++misses;
                    } else {
                        out.push_category(it->second);
                    }
                }
                break;
            }
            case Reconstructor::Kind::FormulaEval: {
                Expr expr = Expr::parse(rec.formula);
                for (std::size_t r = 0; r < rows; ++r) {
                    auto value =
                        expr.eval([&](const std::string& name) -> std::optional<double> {
                            const Column& c = work.column(name);
                            if (c.is_missing(r)) return std::nullopt;
                            return c.numeric_value(r);
                        });
                    if (!value) {
                        out.push_missing();
                    } else if (rec.target_kind == ColumnKind::Timestamp) {
                        out.push_timestamp(std::int64_t(std::llround(*value)));
                    } else {
                        out.push_number(*value);
                    }
                }
                break;
            }
            case Reconstructor::Kind::TimeOffset: {
                const Column& base = work.column(rec.offset_base);
                const Column& offset = work.column(rec.offset_column);
                for (std::size_t r = 0; r < rows; ++r) {
                    if (base.is_missing(r) || offset.is_missing(r)) {
                        out.push_missing();
                        continue;
                    }
                    std::int64_t delta = std::int64_t(std::llround(offset.number(r)));
                    if (delta < rec.min_offset_seconds) delta = rec.min_offset_seconds;
                    out.push_timestamp(base.timestamp(r) + delta);
                }
                break;
            }
            case Reconstructor::Kind::ConditionalAssign: {
                std::vector<std::pair<Comparison, std::string>> compiled;
                for (const auto& [cond, value] : rec.conditions)
                    compiled.emplace_back(Comparison::parse(cond), value);
                for (std::size_t r = 0; r < rows; ++r) {
                    std::string value = rec.default_value;
                    for (const auto& [cmp, v] : compiled) {
                        auto result =
                            cmp.eval([&](const std::string& name) -> std::optional<double> {
                                const Column& c = work.column(name);
                                if (c.is_missing(r)) return std::nullopt;
                                return c.numeric_value(r);
                            });
                        if (result && *result) {
                            value = v;
                            break;
                        }
                    }
                    out.push_category(value);
                }
                break;
            }
        }
    }
    if (lookup_misses) *lookup_misses = misses;
    return work.select_columns(plan.schema);
}

RoundTripReport verify_roundtrip(const Table& table, const CompressionPlan& plan) {
    Table rebuilt = decompress(compress(table, plan), plan, nullptr);

    RoundTripReport report;
    report.pass = true;
    for (const auto& name : plan.schema) {
        const Column& a = table.column(name);
        const Column& b = rebuilt.column(name);
        std::size_t match = 0;
        const std::size_t rows = table.row_count();
        for (std::size_t r = 0; r < rows; ++r) {
            if (a.is_missing(r) || b.is_missing(r)) {
                if (a.is_missing(r) && b.is_missing(r)) ++match;
                continue;
            }
            switch (a.kind()) {
                case ColumnKind::Categorical:
                    if (a.category(r) == b.category(r)) ++match;
                    break;
                case ColumnKind::Timestamp:
                    if (a.timestamp(r) == b.timestamp(r)) ++match;
                    break;
                case ColumnKind::Numeric: {
                    double x = a.number(r), y = b.number(r);
                    if (std::abs(x - y) <= 1e-9 * std::max(std::abs(x), std::abs(y)) ||
                        x == y)
                        ++match;
                    break;
                }
            }
        }
        double rate = rows ? double(match) / double(rows) : 1.0;
        report.column_match_rate[name] = rate;
        if (rate < 1.0) report.pass = false;
    }
    return report;
}

// --- serialization ---------------------------------------------------------

std::string CompressionPlan::to_json_string() const {
    nlohmann::json j;
    j["schema"] = schema;
    j["keep"] = keep;
    j["compress"] = compress;
    j["derived_offsets"] = nlohmann::json::array();
    for (const auto& d : derived_offsets)
        j["derived_offsets"].push_back({{"offset_column", d.offset_column},
                                        {"base", d.base},
                                        {"target", d.target},
                                        {"min_offset_seconds", d.min_offset_seconds}});
    j["reconstructors"] = nlohmann::json::array();
    for (const auto& r : reconstructors) {
        nlohmann::json jr;
        jr["target"] = r.target;
        jr["target_kind"] = to_string(r.target_kind);
        switch (r.kind) {
            case Reconstructor::Kind::Lookup: {
                jr["kind"] = "lookup";
                jr["sources"] = r.lookup_sources;
                jr["map"] = r.lookup_map;
                jr["fallback"] = r.lookup_fallback;
                break;
            }
            case Reconstructor::Kind::FormulaEval:
                jr["kind"] = "formula";
                jr["expr"] = r.formula;
                break;
            case Reconstructor::Kind::TimeOffset:
                jr["kind"] = "time_offset";
                jr["base"] = r.offset_base;
                jr["offset_column"] = r.offset_column;
                jr["min_offset_seconds"] = r.min_offset_seconds;
                break;
            case Reconstructor::Kind::ConditionalAssign: {
                jr["kind"] = "conditional";
                jr["conditions"] = nlohmann::json::array();
                for (const auto& [cond, value] : r.conditions)
                    jr["conditions"].push_back({{"condition", cond}, {"value", value}});
                jr["default"] = r.default_value;
                break;
            }
        }
        j["reconstructors"].push_back(std::move(jr));
    }
    return j.dump(2);
}

CompressionPlan CompressionPlan::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    CompressionPlan plan;
    plan.schema = j.at("schema").get<std::vector<std::string>>();
    for (const auto& k : j.at("keep")) plan.keep.insert(k.get<std::string>());
    for (const auto& k : j.at("compress")) plan.compress.insert(k.get<std::string>());
    for (const auto& jd : j.at("derived_offsets")) {
        plan.derived_offsets.push_back({jd.at("offset_column").get<std::string>(),
                                        jd.at("base").get<std::string>(),
                                        jd.at("target").get<std::string>(),
                                        jd.at("min_offset_seconds").get<std::int64_t>()});
    }
    for (const auto& jr : j.at("reconstructors")) {
        Reconstructor r;
        r.target = jr.at("target").get<std::string>();
        r.target_kind = column_kind_from_string(jr.at("target_kind").get<std::string>());
        const std::string kind = jr.at("kind").get<std::string>();
        if (kind == "lookup") {
            r.kind = Reconstructor::Kind::Lookup;
            r.lookup_sources = jr.at("sources").get<std::vector<std::string>>();
            r.lookup_map = jr.at("map").get<std::map<std::string, std::string>>();
            r.lookup_fallback = jr.at("fallback").get<std::string>();
        } else if (kind == "formula") {
            r.kind = Reconstructor::Kind::FormulaEval;
            r.formula = jr.at("expr").get<std::string>();
        } else if (kind == "time_offset") {
            r.kind = Reconstructor::Kind::TimeOffset;
            r.offset_base = jr.at("base").get<std::string>();
            r.offset_column = jr.at("offset_column").get<std::string>();
            r.min_offset_seconds = jr.at("min_offset_seconds").get<std::int64_t>();
        } else if (kind == "conditional") {
            r.kind = Reconstructor::Kind::ConditionalAssign;
            for (const auto& jc : jr.at("conditions"))
                r.conditions.emplace_back(jc.at("condition").get<std::string>(),
                                          jc.at("value").get<std::string>());
            r.default_value = jr.at("default").get<std::string>();
        } else {
            throw std::runtime_error("unknown reconstructor kind: " + kind);
        }
        plan.reconstructors.push_back(std::move(r));
    }
    return plan;
}

void CompressionPlan::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << to_json_string() << '\n';
}

CompressionPlan CompressionPlan::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_string(text);
}

}  // namespace tabkg
