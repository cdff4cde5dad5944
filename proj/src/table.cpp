#include "tabkg/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "tabkg/rng.hpp"

namespace tabkg {

std::string to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::Numeric: return "numeric";
        case ColumnKind::Categorical: return "categorical";
        case ColumnKind::Timestamp: return "timestamp";
    }
    return "categorical";
}

ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "numeric") return ColumnKind::Numeric;
    if (s == "categorical") return ColumnKind::Categorical;
    if (s == "timestamp") return ColumnKind::Timestamp;
    throw std::runtime_error("unknown column kind: " + s);
}

std::size_t Column::size() const {
    switch (kind_) {
        case ColumnKind::Numeric: return num_.size();
        case ColumnKind::Categorical: return cat_.size();
        case ColumnKind::Timestamp: return ts_.size();
    }
    return 0;
}

void Column::push_number(double v) {
    num_.push_back(v);
    missing_.push_back(false);
}

void Column::push_timestamp(std::int64_t v) {
    ts_.push_back(v);
    missing_.push_back(false);
}

void Column::push_category(const std::string& s) {
    cat_.push_back(intern(s));
    missing_.push_back(false);
}

void Column::push_missing() {
    switch (kind_) {
        case ColumnKind::Numeric: num_.push_back(0.0); break;
        case ColumnKind::Categorical: cat_.push_back(-1); break;
        case ColumnKind::Timestamp: ts_.push_back(0); break;
    }
    missing_.push_back(true);
}

bool Column::is_missing(std::size_t row) const { return missing_.at(row); }
double Column::number(std::size_t row) const { return num_.at(row); }
std::int64_t Column::timestamp(std::size_t row) const { return ts_.at(row); }
std::int32_t Column::category_id(std::size_t row) const { return cat_.at(row); }

const std::string& Column::category(std::size_t row) const {
    return cat_values_.at(std::size_t(cat_.at(row)));
}

std::int32_t Column::intern(const std::string& s) {
    auto it = cat_index_.find(s);
    if (it != cat_index_.end()) return it->second;
    std::int32_t id = std::int32_t(cat_values_.size());
    cat_values_.push_back(s);
    cat_index_.emplace(s, id);
    return id;
}

std::optional<std::int32_t> Column::find_category(const std::string& s) const {
    auto it = cat_index_.find(s);
    if (it == cat_index_.end()) return std::nullopt;
    return it->second;
}

void Column::set_number(std::size_t row, double v) {
    num_.at(row) = v;
    missing_.at(row) = false;
}

void Column::set_timestamp(std::size_t row, std::int64_t v) {
    ts_.at(row) = v;
    missing_.at(row) = false;
}

void Column::set_category(std::size_t row, const std::string& s) {
    cat_.at(row) = intern(s);
    missing_.at(row) = false;
}

static std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string Column::cell_text(std::size_t row) const {
    if (is_missing(row)) return "";
    switch (kind_) {
        case ColumnKind::Numeric: return format_double(num_[row]);
        case ColumnKind::Categorical: return category(row);
        case ColumnKind::Timestamp: return format_timestamp(ts_[row]);
    }
    return "";
}

double Column::numeric_value(std::size_t row) const {
    switch (kind_) {
        case ColumnKind::Numeric: return num_.at(row);
        case ColumnKind::Timestamp: return double(ts_.at(row));
        case ColumnKind::Categorical:
            throw std::runtime_error("categorical column has no numeric value");
    }
    return 0.0;
}

Table::Table(std::vector<ColumnMeta> metas) : metas_(std::move(metas)) {
    for (std::size_t i = 0; i < metas_.size(); ++i) {
        if (metas_[i].name.empty())
            throw std::runtime_error("column name must be nonempty");
        if (!index_.emplace(metas_[i].name, i).second)
            throw std::runtime_error("duplicate column name: " + metas_[i].name);
        columns_.emplace_back(metas_[i].kind);
    }
}

bool Table::has_column(const std::string& name) const {
    return index_.count(name) != 0;
}

std::size_t Table::column_index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown column: " + name);
    return it->second;
}

const Column& Table::column(const std::string& name) const {
    return columns_[column_index(name)];
}

Column& Table::column_mut(const std::string& name) {
    return columns_[column_index(name)];
}

void Table::append_row_from_text(const std::vector<std::string>& cells) {
    if (cells.size() != metas_.size())
        throw std::runtime_error("row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string& text = cells[i];
        Column& col = columns_[i];
        if (text.empty()) {
            col.push_missing();
            continue;
        }
        switch (metas_[i].kind) {
            case ColumnKind::Numeric: {
                auto v = parse_number(text);
                if (v && std::isfinite(*v)) {
                    col.push_number(*v);
                } else {
                    col.push_missing();
                    ++parse_warnings_;
                }
                break;
            }
            case ColumnKind::Timestamp: {
                auto v = parse_timestamp(text);
                if (v) {
                    col.push_timestamp(*v);
                } else {
                    col.push_missing();
                    ++parse_warnings_;
                }
                break;
            }
            case ColumnKind::Categorical:
                col.push_category(text);
                break;
        }
    }
    ++rows_;
}

Table Table::select_rows(const std::vector<std::size_t>& rows) const {
    Table out(metas_);
    for (std::size_t r : rows) {
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            const Column& src = columns_[c];
            Column& dst = out.columns_[c];
            if (src.is_missing(r)) {
                dst.push_missing();
                continue;
            }
            switch (src.kind()) {
                case ColumnKind::Numeric: dst.push_number(src.number(r)); break;
                case ColumnKind::Timestamp: dst.push_timestamp(src.timestamp(r)); break;
                case ColumnKind::Categorical: dst.push_category(src.category(r)); break;
            }
        }
        ++out.rows_;
    }
    return out;
}

Table Table::select_columns(const std::vector<std::string>& names) const {
    std::vector<ColumnMeta> metas;
    for (const auto& n : names) metas.push_back(metas_[column_index(n)]);
    Table out(std::move(metas));
    for (std::size_t j = 0; j < names.size(); ++j)
        out.columns_[j] = columns_[column_index(names[j])];
    out.rows_ = rows_;
    return out;
}

// --- timestamps ------------------------------------------------------------

namespace {

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = unsigned(y - era * 400);
    const unsigned doy = (153u * unsigned(m + (m > 2 ? -3 : 9)) + 2u) / 5u + unsigned(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + std::int64_t(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = unsigned(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = std::int64_t(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = int(doy - (153 * mp + 2) / 5 + 1);
    m = int(mp + (mp < 10 ? 3 : -9));
    y = int(yy + (m <= 2));
}

bool parse_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    out = 0;
    for (std::size_t i = 0; i < len; ++i) {
        char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        out = out * 10 + (c - '0');
    }
    return true;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(const std::string& raw) {
    std::string s = raw;
    if (!s.empty() && s.back() == 'Z') s.pop_back();
    int y, mo, d;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!parse_int(s, 0, 4, y) || !parse_int(s, 5, 2, mo) || !parse_int(s, 8, 2, d))
        return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    int hh = 0, mi = 0, ss = 0;
    if (s.size() > 10) {
        if (s.size() != 19 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':')
            return std::nullopt;
        if (!parse_int(s, 11, 2, hh) || !parse_int(s, 14, 2, mi) || !parse_int(s, 17, 2, ss))
            return std::nullopt;
        if (hh > 23 || mi > 59 || ss > 60) return std::nullopt;
    }
    return days_from_civil(y, mo, d) * 86400 + hh * 3600 + mi * 60 + ss;
}

std::string format_timestamp(std::int64_t t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d", y, m, d,
                  int(rem / 3600), int(rem / 60 % 60), int(rem % 60));
    return buf;
}

std::optional<double> parse_number(const std::string& text) {
    const char* begin = text.c_str();
    const char* end = begin + text.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    double value;
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
    return value;
}

ColumnKind infer_column_kind(const std::vector<std::string>& values) {
    std::size_t nonempty = 0, numeric = 0, timestamp = 0;
    for (const auto& v : values) {
        if (v.empty()) continue;
        ++nonempty;
        if (parse_number(v)) ++numeric;
        if (parse_timestamp(v)) ++timestamp;
    }
    if (nonempty == 0) return ColumnKind::Categorical;
    if (double(numeric) / double(nonempty) >= 0.95) return ColumnKind::Numeric;
    if (double(timestamp) / double(nonempty) >= 0.95) return ColumnKind::Timestamp;
    return ColumnKind::Categorical;
}

// --- CSV -------------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    std::size_t i = 0;
    while (i < data.size()) {
        char c = data[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < data.size() && data[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
            row.push_back(std::move(cell));
            cell.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else {
            cell += c;
        }
        ++i;
    }
    if (!cell.empty() || !row.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

Table load_table(const std::string& csv_path, const std::string& metadata_path) {
    std::ifstream meta_in(metadata_path);
    if (!meta_in) throw std::runtime_error("cannot open metadata: " + metadata_path);
    nlohmann::json meta = nlohmann::json::parse(meta_in);

    auto rows = read_csv(csv_path);
    if (rows.empty()) throw std::runtime_error("empty table: " + csv_path);
    const std::vector<std::string>& header = rows.front();

    for (auto it = meta.begin(); it != meta.end(); ++it) {
        if (std::find(header.begin(), header.end(), it.key()) == header.end())
            throw std::runtime_error("header/metadata mismatch: metadata column '" +
                                     it.key() + "' absent from CSV header");
    }

    std::vector<ColumnMeta> metas;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (!meta.contains(name))
            throw std::runtime_error("header/metadata mismatch: CSV column '" + name +
                                     "' absent from metadata");
        const auto& entry = meta.at(name);
        ColumnMeta cm;
        cm.name = name;
        cm.description = entry.value("description", "");
        if (entry.contains("kind")) {
            cm.kind = column_kind_from_string(entry.at("kind").get<std::string>());
        } else {
            std::vector<std::string> raw;
            for (std::size_t r = 1; r < rows.size(); ++r) raw.push_back(rows[r].at(c));
            cm.kind = infer_column_kind(raw);
        }
        metas.push_back(std::move(cm));
    }

    Table table(std::move(metas));
    for (std::size_t r = 1; r < rows.size(); ++r) table.append_row_from_text(rows[r]);
    if (table.row_count() == 0) throw std::runtime_error("empty table: " + csv_path);
    return table;
}

void save_table_csv(const Table& table, const std::string& csv_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + csv_path);
    for (std::size_t c = 0; c < table.column_count(); ++c) {
        if (c) out << ',';
        out << csv_escape(table.metas()[c].name);
    }
    out << '\n';
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        for (std::size_t c = 0; c < table.column_count(); ++c) {
            if (c) out << ',';
            out << csv_escape(table.column(c).cell_text(r));
        }
        out << '\n';
    }
}

void save_table_metadata(const Table& table, const std::string& metadata_path) {
    nlohmann::json meta = nlohmann::json::object();
    for (const auto& cm : table.metas()) {
        meta[cm.name] = {{"description", cm.description}, {"kind", to_string(cm.kind)}};
    }
    std::ofstream out(metadata_path);
    if (!out) throw std::runtime_error("cannot write file: " + metadata_path);
    out << meta.dump(2) << '\n';
}

std::pair<Table, Table> split_holdout(const Table& table, double fraction,
                                      std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::runtime_error("holdout fraction must lie in (0,1)");
    if (table.row_count() < 2) throw std::runtime_error("need at least 2 rows to split");
    std::vector<std::size_t> order(table.row_count());
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng rng(seed);
    rng.shuffle(order);
    std::size_t first = std::size_t(std::llround(double(table.row_count()) * (1.0 - fraction)));
    first = std::min(first, table.row_count() - 1);
    if (first == 0) first = 1;
    std::vector<std::size_t> a(order.begin(), order.begin() + std::ptrdiff_t(first));
    std::vector<std::size_t> b(order.begin() + std::ptrdiff_t(first), order.end());
    return {table.select_rows(a), table.select_rows(b)};
}

}  // namespace tabkg
