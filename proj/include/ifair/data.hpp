#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ifair/errors.hpp"

namespace ifair {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ColumnKind { numeric, categorical, binary };
enum class TaskKind { classification, ranking };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    bool is_protected = false;
};

// Rule mapping raw rows to a binary protected-group flag, used by group
// metrics and the adversarial probe. For binary columns the default rule is
// value == 1.
struct ProtectedFlagRule {
    std::string column;
    std::string equals = "1";
};

struct FeatureSchema {
    std::vector<ColumnSpec> columns;
    std::string outcome;
    TaskKind task = TaskKind::classification;
    std::optional<std::string> positive_label;      // categorical outcomes
    std::optional<std::string> query_column;        // ranking tasks
    std::optional<ProtectedFlagRule> protected_flag;

    void validate() const;
};

// Parse a dataset config file (JSON) into a schema.
FeatureSchema load_schema(const std::string& path);

// One post-encoding column. One-hot derived columns remember their source
// column and category so encodings can be audited and decoded.
struct EncodedColumn {
    std::string name;
    int raw_index = -1;
    std::string category;  // empty unless one-hot derived
    bool is_protected = false;
};

struct LoadStats {
    std::int64_t rows_read = 0;
    std::int64_t rows_dropped_missing_outcome = 0;
    std::vector<std::pair<std::string, std::int64_t>> imputed_cells;
};

struct DataTable {
    RowMatrix X;
    Eigen::VectorXd outcome;
    std::vector<std::string> row_ids;
    std::vector<EncodedColumn> columns;
    std::vector<int> protected_idx;              // ascending
    std::vector<unsigned char> protected_flag;   // per-row group membership
    std::vector<std::string> query_ids;          // per-row, ranking tasks only
    TaskKind task = TaskKind::classification;
    LoadStats stats;

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }

    std::vector<int> nonprotected_idx() const;
    // Feature matrix restricted to non-protected columns.
    RowMatrix masked_matrix() const;
    DataTable select_rows(const std::vector<int>& idx) const;
    int column_index(const std::string& name) const;  // -1 if absent
};

struct SplitSpec {
    std::uint64_t seed = 0;
    std::array<double, 3> fractions{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

struct SplitIndices {
    std::vector<int> train, validation, test;
};

struct Split {
    DataTable train, validation, test;
    SplitIndices indices;
};

// Load a CSV (header row, comma separator, '.' decimal point) under a schema.
// Categorical columns are one-hot encoded with lexicographically ordered
// category columns; protected flags propagate to every derived column. Rows
// whose outcome is missing or unparseable are dropped and counted. Missing
// numeric/binary features are imputed with the column mean, missing
// categorical features with the column mode; both are counted per column.
DataTable load_csv(const std::string& path, const FeatureSchema& schema);

// Per-column scale factors. A zero entry marks a constant column, which is
// passed through unchanged.
struct ScalingParams {
    Eigen::VectorXd column_std;
};

ScalingParams compute_unit_variance(const DataTable& table);
DataTable apply_scaling(const DataTable& table, const ScalingParams& params);
// Scale-only normalization using the table's own statistics: each non-constant
// column is divided by its sample (n-1) standard deviation. No centering.
DataTable normalize_unit_variance(const DataTable& table);

SplitIndices make_split_indices(Eigen::Index rows, const SplitSpec& spec);
Split split(const DataTable& table, const SplitSpec& spec);

// Remove protected columns. Row count, outcome and row-level flags unchanged.
DataTable mask_protected(const DataTable& table);

// Write a prepared table back to CSV (features + outcome + flags), full
// round-trip precision.
void write_table_csv(const DataTable& table, const std::string& path);
DataTable read_table_csv(const std::string& path);

}  // namespace ifair
