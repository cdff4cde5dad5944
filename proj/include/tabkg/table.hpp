#ifndef TABKG_TABLE_HPP
#define TABKG_TABLE_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace tabkg {

enum class ColumnKind { Numeric, Categorical, Timestamp };

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

struct ColumnMeta {
    std::string name;
    std::string description;
    ColumnKind kind = ColumnKind::Categorical;
};

// Columnar storage for one column. Category strings are interned to
// integer ids; id -1 marks a missing categorical cell.
class Column {
public:
    explicit Column(ColumnKind kind) : kind_(kind) {}

    ColumnKind kind() const { return kind_; }
    std::size_t size() const;

    void push_number(double v);
    void push_timestamp(std::int64_t epoch_seconds);
    void push_category(const std::string& s);
    void push_missing();

    bool is_missing(std::size_t row) const;
    double number(std::size_t row) const;
    std::int64_t timestamp(std::size_t row) const;
    std::int32_t category_id(std::size_t row) const;
    const std::string& category(std::size_t row) const;

    // Interner access.
    std::int32_t intern(const std::string& s);
    std::optional<std::int32_t> find_category(const std::string& s) const;
    const std::vector<std::string>& categories() const { return cat_values_; }

    // Raw vectors, used by row-wise kernels.
    const std::vector<double>& numbers() const { return num_; }
    const std::vector<std::int64_t>& timestamps() const { return ts_; }
    const std::vector<std::int32_t>& category_ids() const { return cat_; }

    void set_number(std::size_t row, double v);
    void set_timestamp(std::size_t row, std::int64_t v);
    void set_category(std::size_t row, const std::string& s);

    // Cell as string (CSV rendering); empty string for Missing.
    std::string cell_text(std::size_t row) const;

    // Numeric view of a cell: Numeric value or Timestamp epoch seconds.
    // Throws for Categorical.
    double numeric_value(std::size_t row) const;

private:
    ColumnKind kind_;
    std::vector<double> num_;
    std::vector<std::int64_t> ts_;
    std::vector<std::int32_t> cat_;
    std::vector<bool> missing_;
    std::vector<std::string> cat_values_;
    std::unordered_map<std::string, std::int32_t> cat_index_;
};

class Table {
public:
    Table() = default;
    explicit Table(std::vector<ColumnMeta> metas);

    std::size_t row_count() const { return rows_; }
    std::size_t column_count() const { return metas_.size(); }
    const std::vector<ColumnMeta>& metas() const { return metas_; }

    bool has_column(const std::string& name) const;
    std::size_t column_index(const std::string& name) const;
    const Column& column(const std::string& name) const;
    const Column& column(std::size_t idx) const { return columns_.at(idx); }
    Column& column_mut(std::size_t idx) { return columns_.at(idx); }
    Column& column_mut(const std::string& name);

    // Appends one row given per-column cell texts; unparseable cells
    // become Missing and increment the parse-warning counter.
    void append_row_from_text(const std::vector<std::string>& cells);
    void set_row_count(std::size_t n) { rows_ = n; }
    void bump_rows() { ++rows_; }

    std::size_t parse_warning_count() const { return parse_warnings_; }

    Table select_rows(const std::vector<std::size_t>& rows) const;
    Table select_columns(const std::vector<std::string>& names) const;

private:
    std::vector<ColumnMeta> metas_;
    std::vector<Column> columns_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t rows_ = 0;
    std::size_t parse_warnings_ = 0;
};

// Timestamp helpers: UTC epoch seconds <-> "YYYY-MM-DD[ HH:MM:SS]".
std::optional<std::int64_t> parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t epoch_seconds);
std::optional<double> parse_number(const std::string& text);

ColumnKind infer_column_kind(const std::vector<std::string>& values);

Table load_table(const std::string& csv_path, const std::string& metadata_path);
void save_table_csv(const Table& table, const std::string& csv_path);
void save_table_metadata(const Table& table, const std::string& metadata_path);

std::pair<Table, Table> split_holdout(const Table& table, double fraction,
                                      std::uint64_t seed);

// RFC-4180 cell handling, shared with other writers.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
std::string csv_escape(const std::string& cell);

}  // namespace tabkg

#endif
