#include "tabkg/fixtures.hpp"

#include <cmath>
#include <stdexcept>

#include "tabkg/rng.hpp"

namespace tabkg {

namespace {

constexpr std::int64_t kYearStart = 1704067200;  // 2024-01-01 00:00:00 UTC
constexpr std::int64_t kYearEnd = 1735689599;    // 2024-12-31 23:59:59 UTC

double noise_rate(const FixtureSpec& spec, const std::string& target) {
    auto it = spec.noise.find(target);
    if (it == spec.noise.end()) return 0.0;
    if (it->second < 0.0 || it->second > 0.5)
        throw std::runtime_error("violation probability out of [0,0.5] for " + target);
    return it->second;
}

bool violate(Rng& rng, double rate) { return rate > 0.0 && rng.uniform() < rate; }

double round2(double v) { return std::round(v * 100.0) / 100.0; }

Edge make_edge(std::string src, std::string tgt, EdgeKind kind, Rule rule,
               double sigma) {
    Edge e;
    e.source = std::move(src);
    e.target = std::move(tgt);
    e.kind = kind;
    e.confidence = 1.0;
    e.rule = std::move(rule);
    e.score = sigma;
    return e;
}

FixtureResult mini_retail(const FixtureSpec& spec) {
    const std::vector<std::string> cities = {"city_0", "city_1", "city_2", "city_3",
                                             "city_4", "city_5", "city_6", "city_7",
                                             "city_8", "city_9"};
    const std::vector<std::string> states = {"state_0", "state_1", "state_2",
                                             "state_3"};
    const std::vector<std::string> countries = {"country_0", "country_1"};
    auto state_of = [&](std::size_t city) { return states[city % 4]; };
    auto country_of = [&](const std::string& state) {
        return state == "state_0" || state == "state_1" ? countries[0] : countries[1];
    };
    const std::vector<std::string> modes = {"Standard", "First Class", "Second Class",
                                            "Same Day"};

    std::vector<ColumnMeta> metas = {
        {"city", "ship-to city", ColumnKind::Categorical},
        {"state", "ship-to state, determined by city", ColumnKind::Categorical},
        {"country", "ship-to country, determined by state", ColumnKind::Categorical},
        {"qty", "units ordered", ColumnKind::Numeric},
        {"price", "unit price", ColumnKind::Numeric},
        {"sales", "line revenue, qty times price", ColumnKind::Numeric},
        {"discount", "10 percent of sales", ColumnKind::Numeric},
        {"total", "sales minus discount", ColumnKind::Numeric},
        {"order_date", "order placement time", ColumnKind::Timestamp},
        {"ship_date", "shipment time, after order_date", ColumnKind::Timestamp},
        {"scheduled_days", "promised shipping window in days", ColumnKind::Numeric},
        {"shipping_mode", "carrier service level", ColumnKind::Categorical},
        {"late_flag", "1 when shipping exceeded the window", ColumnKind::Categorical},
    };

    double r_state = noise_rate(spec, "state");
    double r_country = noise_rate(spec, "country");
    double r_sales = noise_rate(spec, "sales");
    double r_discount = noise_rate(spec, "discount");
    double r_total = noise_rate(spec, "total");
    double r_ship = noise_rate(spec, "ship_date");
    double r_mode = noise_rate(spec, "shipping_mode");
    double r_late = noise_rate(spec, "late_flag");

    Rng rng(spec.seed);
    Table table(metas);
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
        std::size_t city = rng.below(cities.size());
        std::string state = state_of(city);
        if (violate(rng, r_state)) {
            // pick a wrong state so the row disagrees with the modal map
            std::string wrong;
            do {
                wrong = states[rng.below(states.size())];
            } while (wrong == state);
            state = wrong;
        }
        std::string country = country_of(state);
        if (violate(rng, r_country))
            country = country == countries[0] ? countries[1] : countries[0];

        double qty = double(rng.range(1, 20));
        double price = round2(rng.uniform(5.0, 500.0));
        double sales = qty * price;
        if (violate(rng, r_sales)) sales *= 1.0 + rng.uniform(0.1, 0.5);
        double discount = sales * 0.1;
        if (violate(rng, r_discount)) discount *= 1.0 + rng.uniform(0.1, 0.5);
        double total = sales - discount;
        if (violate(rng, r_total)) total *= 1.0 + rng.uniform(0.1, 0.5);

        std::int64_t order_date = rng.range(kYearStart, kYearEnd);
        std::int64_t ship_date = order_date + rng.range(1, 9 * 86400);
        if (violate(rng, r_ship)) std::swap(order_date, ship_date);

        double scheduled_days = double(rng.range(1, 7));
        std::string mode = modes[rng.weighted({0.5, 0.2, 0.2, 0.1})];
        if (violate(rng, r_mode)) mode = "Unknown";

        bool late = ship_date - order_date > std::int64_t(scheduled_days) * 86400;
        if (late && violate(rng, r_late)) late = false;

        table.column_mut(std::size_t(0)).push_category(cities[city]);
        table.column_mut(1).push_category(state);
        table.column_mut(2).push_category(country);
        table.column_mut(3).push_number(qty);
        table.column_mut(4).push_number(price);
        table.column_mut(5).push_number(sales);
        table.column_mut(6).push_number(discount);
        table.column_mut(7).push_number(total);
        table.column_mut(8).push_timestamp(order_date);
        table.column_mut(9).push_timestamp(ship_date);
        table.column_mut(10).push_number(scheduled_days);
        table.column_mut(11).push_category(mode);
        table.column_mut(12).push_category(late ? "1" : "0");
        table.bump_rows();
    }

    std::vector<std::string> nodes;
    for (const auto& m : metas) nodes.push_back(m.name);
    Graph truth(nodes);
    truth.insert_edge(make_edge("city", "state", EdgeKind::Hierarchical, HierMapRule{},
                                1.0 - r_state));
    truth.insert_edge(make_edge("state", "country", EdgeKind::Hierarchical,
                                HierMapRule{}, 1.0 - r_country));
    truth.insert_edge(make_edge("qty", "sales", EdgeKind::Mathematical,
                                FormulaRule{"qty * price"}, 1.0 - r_sales));
    truth.insert_edge(make_edge("price", "sales", EdgeKind::Mathematical,
                                FormulaRule{"qty * price"}, 1.0 - r_sales));
    truth.insert_edge(make_edge("sales", "discount", EdgeKind::Mathematical,
                                FormulaRule{"sales * 0.1"}, 1.0 - r_discount));
    truth.insert_edge(make_edge("sales", "total", EdgeKind::Mathematical,
                                FormulaRule{"sales - discount"}, 1.0 - r_total));
    truth.insert_edge(make_edge("discount", "total", EdgeKind::Mathematical,
                                FormulaRule{"sales - discount"}, 1.0 - r_total));
    truth.insert_edge(make_edge("order_date", "ship_date", EdgeKind::Temporal,
                                TemporalOrderRule{TemporalRelation::Before, ""},
                                1.0 - r_ship));
    truth.insert_edge(make_edge(
        "shipping_mode", "shipping_mode", EdgeKind::Semantic,
        DomainSetRule{{"Standard", "First Class", "Second Class", "Same Day"}},
        1.0 - r_mode));
    ConditionImpliesRule late_rule{
        "ship_date - order_date > scheduled_days * 86400", "1"};
    truth.insert_edge(make_edge("ship_date", "late_flag", EdgeKind::Semantic,
                                late_rule, 1.0 - r_late));
    truth.insert_edge(make_edge("order_date", "late_flag", EdgeKind::Semantic,
                                late_rule, 1.0 - r_late));
    truth.insert_edge(make_edge("scheduled_days", "late_flag", EdgeKind::Semantic,
                                late_rule, 1.0 - r_late));

    return {std::move(table), std::move(truth)};
}

FixtureResult mini_procurement(const FixtureSpec& spec) {
    const std::vector<std::string> suppliers = {
        "supplier_0", "supplier_1", "supplier_2", "supplier_3",
        "supplier_4", "supplier_5", "supplier_6", "supplier_7"};
    const std::vector<std::string> countries = {"country_0", "country_1", "country_2",
                                                "country_3", "country_4"};
    auto country_of = [&](std::size_t supplier) {
        // 2-2-2-1-1 split over five countries
        static const std::size_t map[8] = {0, 0, 1, 1, 2, 2, 3, 4};
        return countries[map[supplier]];
    };
    const std::vector<std::string> statuses = {"Open", "Approved", "Delivered",
                                               "Cancelled"};

    std::vector<ColumnMeta> metas = {
        {"supplier", "vendor name", ColumnKind::Categorical},
        {"supplier_country", "vendor home country", ColumnKind::Categorical},
        {"qty", "units ordered", ColumnKind::Numeric},
        {"net_price", "unit price before tax", ColumnKind::Numeric},
        {"net_amount", "qty times net_price", ColumnKind::Numeric},
        {"tax_amount", "20 percent of net_amount", ColumnKind::Numeric},
        {"gross_amount", "net plus tax", ColumnKind::Numeric},
        {"order_date", "purchase order creation time", ColumnKind::Timestamp},
        {"planned_delivery_date", "agreed delivery time", ColumnKind::Timestamp},
        {"actual_delivery_date", "actual delivery time", ColumnKind::Timestamp},
        {"po_status", "purchase order state", ColumnKind::Categorical},
    };

    double r_country = noise_rate(spec, "supplier_country");
    double r_net = noise_rate(spec, "net_amount");
    double r_tax = noise_rate(spec, "tax_amount");
    double r_gross = noise_rate(spec, "gross_amount");
    double r_planned = noise_rate(spec, "planned_delivery_date");
    double r_actual = noise_rate(spec, "actual_delivery_date");
    double r_status = noise_rate(spec, "po_status");

    Rng rng(spec.seed);
    Table table(metas);
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
        std::size_t supplier = rng.below(suppliers.size());
        std::string country = country_of(supplier);
        if (violate(rng, r_country)) {
            std::string wrong;
            do {
                wrong = countries[rng.below(countries.size())];
            } while (wrong == country);
            country = wrong;
        }

        double qty = double(rng.range(1, 50));
        double net_price = round2(rng.uniform(10.0, 1000.0));
        double net_amount = qty * net_price;
        if (violate(rng, r_net)) net_amount *= 1.0 + rng.uniform(0.1, 0.5);
        double tax_amount = net_amount * 0.2;
        if (violate(rng, r_tax)) tax_amount *= 1.0 + rng.uniform(0.1, 0.5);
        double gross_amount = net_amount + tax_amount;
        if (violate(rng, r_gross)) gross_amount *= 1.0 + rng.uniform(0.1, 0.5);

        std::int64_t order_date = rng.range(kYearStart, kYearEnd);
        std::int64_t planned = order_date + rng.range(3 * 86400, 30 * 86400);
        if (violate(rng, r_planned)) std::swap(order_date, planned);
        std::int64_t actual = planned + rng.range(1, 10 * 86400);
        if (violate(rng, r_actual)) std::swap(planned, actual);

        std::string status = statuses[rng.weighted({0.2, 0.3, 0.4, 0.1})];
        if (violate(rng, r_status)) status = "Unknown";

        table.column_mut(std::size_t(0)).push_category(suppliers[supplier]);
        table.column_mut(1).push_category(country);
        table.column_mut(2).push_number(qty);
        table.column_mut(3).push_number(net_price);
        table.column_mut(4).push_number(net_amount);
        table.column_mut(5).push_number(tax_amount);
        table.column_mut(6).push_number(gross_amount);
        table.column_mut(7).push_timestamp(order_date);
        table.column_mut(8).push_timestamp(planned);
        table.column_mut(9).push_timestamp(actual);
        table.column_mut(10).push_category(status);
        table.bump_rows();
    }

    std::vector<std::string> nodes;
    for (const auto& m : metas) nodes.push_back(m.name);
    Graph truth(nodes);
    truth.insert_edge(make_edge("supplier", "supplier_country", EdgeKind::Hierarchical,
                                HierMapRule{}, 1.0 - r_country));
    truth.insert_edge(make_edge("qty", "net_amount", EdgeKind::Mathematical,
                                FormulaRule{"qty * net_price"}, 1.0 - r_net));
    truth.insert_edge(make_edge("net_price", "net_amount", EdgeKind::Mathematical,
                                FormulaRule{"qty * net_price"}, 1.0 - r_net));
    truth.insert_edge(make_edge("net_amount", "tax_amount", EdgeKind::Mathematical,
                                FormulaRule{"net_amount * 0.2"}, 1.0 - r_tax));
    truth.insert_edge(make_edge("net_amount", "gross_amount", EdgeKind::Mathematical,
                                FormulaRule{"net_amount + tax_amount"}, 1.0 - r_gross));
    truth.insert_edge(make_edge("tax_amount", "gross_amount", EdgeKind::Mathematical,
                                FormulaRule{"net_amount + tax_amount"}, 1.0 - r_gross));
    truth.insert_edge(make_edge("order_date", "planned_delivery_date",
                                EdgeKind::Temporal,
                                TemporalOrderRule{TemporalRelation::Before, ""},
                                1.0 - r_planned));
    truth.insert_edge(make_edge("planned_delivery_date", "actual_delivery_date",
                                EdgeKind::Temporal,
                                TemporalOrderRule{TemporalRelation::Before, ""},
                                1.0 - r_actual));
    truth.insert_edge(make_edge("po_status", "po_status", EdgeKind::Semantic,
                                DomainSetRule{{"Open", "Approved", "Delivered",
                                               "Cancelled"}},
                                1.0 - r_status));

    return {std::move(table), std::move(truth)};
}

}  // namespace

FixtureResult generate_fixture(const FixtureSpec& spec) {
    if (spec.recipe == "mini-retail") return mini_retail(spec);
    if (spec.recipe == "mini-procurement") return mini_procurement(spec);
    throw std::runtime_error("unknown fixture recipe: " + spec.recipe);
}

}  // namespace tabkg
