#include "ifair/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ifair/rng.hpp"
#include "ifair/textio.hpp"

namespace ifair {

namespace {


ColumnKind parse_kind(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "binary") return ColumnKind::binary;
    throw SchemaError("unknown column kind: " + s);
}

}  // namespace

void FeatureSchema::validate() const {
    if (outcome.empty()) throw SchemaError("schema has no outcome column");
    std::set<std::string> seen;
    for (const auto& c : columns) {
        if (c.name.empty()) throw SchemaError("schema column with empty name");
        if (!seen.insert(c.name).second)
            throw SchemaError("duplicate schema column: " + c.name);
        if (c.name == outcome)
            throw SchemaError("outcome column '" + outcome + "' also listed as a feature");
    }
    if (protected_flag) {
        bool found = false;
        for (const auto& c : columns)
            if (c.name == protected_flag->column) found = c.is_protected;
        if (!found)
            throw SchemaError("protected_flag column '" + protected_flag->column +
                              "' is not a protected feature column");
    }
}

FeatureSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("invalid config JSON in " + path + ": " + e.what());
    }
    FeatureSchema schema;
    if (!j.contains("outcome") || !j.contains("columns"))
        throw ConfigError("config must declare 'outcome' and 'columns'");
    schema.outcome = j.at("outcome").get<std::string>();
    const std::string task = j.value("task", std::string("classification"));
    if (task == "classification")
        schema.task = TaskKind::classification;
    else if (task == "ranking")
        schema.task = TaskKind::ranking;
    else
        throw ConfigError("unknown task kind: " + task);
    if (j.contains("positive_label"))
        schema.positive_label = j.at("positive_label").get<std::string>();
    if (j.contains("query_column"))
        schema.query_column = j.at("query_column").get<std::string>();
    if (j.contains("protected_flag")) {
        ProtectedFlagRule rule;
        rule.column = j.at("protected_flag").at("column").get<std::string>();
        rule.equals = j.at("protected_flag").value("equals", std::string("1"));
        schema.protected_flag = rule;
    }
    for (const auto& jc : j.at("columns")) {
        ColumnSpec spec;
        spec.name = jc.at("name").get<std::string>();
        spec.kind = parse_kind(jc.value("kind", std::string("numeric")));
        spec.is_protected = jc.value("protected", false);
        schema.columns.push_back(std::move(spec));
    }
    schema.validate();
    return schema;
}

std::vector<int> DataTable::nonprotected_idx() const {
    std::vector<int> out;
    std::set<int> prot(protected_idx.begin(), protected_idx.end());
    for (int c = 0; c < static_cast<int>(cols()); ++c)
        if (!prot.count(c)) out.push_back(c);
    return out;
}

RowMatrix DataTable::masked_matrix() const {
    const auto keep = nonprotected_idx();
    RowMatrix out(rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) out.col(j) = X.col(keep[j]);
    return out;
}

DataTable DataTable::select_rows(const std::vector<int>& idx) const {
    DataTable out;
    out.columns = columns;
    out.protected_idx = protected_idx;
    out.task = task;
    out.X.resize(static_cast<Eigen::Index>(idx.size()), cols());
    out.outcome.resize(static_cast<Eigen::Index>(idx.size()));
    out.row_ids.reserve(idx.size());
    out.protected_flag.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.X.row(r) = X.row(idx[r]);
        out.outcome[r] = outcome[idx[r]];
        out.row_ids.push_back(row_ids[idx[r]]);
        out.protected_flag.push_back(protected_flag[idx[r]]);
        if (!query_ids.empty()) out.query_ids.push_back(query_ids[idx[r]]);
    }
    return out;
}

int DataTable::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j].name == name) return static_cast<int>(j);
    return -1;
}

DataTable load_csv(const std::string& path, const FeatureSchema& schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV: " + path);
    const auto header = split_csv_line(line);
    std::map<std::string, int> header_idx;
    for (std::size_t i = 0; i < header.size(); ++i)
        header_idx.emplace(header[i], static_cast<int>(i));

    auto require_column = [&](const std::string& name) {
        auto it = header_idx.find(name);
        if (it == header_idx.end())
            throw SchemaError("column '" + name + "' not found in " + path);
        return it->second;
    };

    std::vector<int> feature_pos;
    for (const auto& c : schema.columns) feature_pos.push_back(require_column(c.name));
    const int outcome_pos = require_column(schema.outcome);
    int query_pos = -1;
    if (schema.query_column) query_pos = require_column(*schema.query_column);

    const std::size_t ncols_raw = schema.columns.size();
    std::vector<std::vector<std::string>> cells;  // per kept row, raw feature cells
    std::vector<double> outcomes;
    std::vector<std::string> row_ids, queries;
    LoadStats stats;

    std::int64_t data_row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = split_csv_line(line);
        ++data_row;
        ++stats.rows_read;
        if (static_cast<std::size_t>(outcome_pos) >= fields.size()) {
            ++stats.rows_dropped_missing_outcome;
            continue;
        }
        const std::string outc = fields[outcome_pos];
        double y = 0;
        if (schema.task == TaskKind::classification && schema.positive_label) {
            if (is_missing_token(outc)) {
                ++stats.rows_dropped_missing_outcome;
                continue;
            }
            y = (outc == *schema.positive_label) ? 1.0 : 0.0;
        } else {
            if (is_missing_token(outc) || !parse_double(outc, y) || !std::isfinite(y)) {
                ++stats.rows_dropped_missing_outcome;
                continue;
            }
            if (schema.task == TaskKind::classification && y != 0.0 && y != 1.0)
                throw DataError("classification outcome must be 0/1, got '" + outc +
                                "' (declare positive_label to map categories)");
        }
        std::vector<std::string> row(ncols_raw);
        for (std::size_t j = 0; j < ncols_raw; ++j) {
            row[j] = static_cast<std::size_t>(feature_pos[j]) < fields.size()
                         ? fields[feature_pos[j]]
                         : std::string();
        }
        cells.push_back(std::move(row));
        outcomes.push_back(y);
        row_ids.push_back(std::to_string(data_row));
        if (query_pos >= 0)
            queries.push_back(static_cast<std::size_t>(query_pos) < fields.size()
                                  ? fields[query_pos]
                                  : std::string());
    }
    const auto m = static_cast<Eigen::Index>(cells.size());
    if (m == 0) throw DataError("no usable rows after cleaning: " + path);

    // Encode column by column.
    DataTable table;
    table.task = schema.task;
    std::vector<Eigen::VectorXd> encoded_cols;
    for (std::size_t j = 0; j < ncols_raw; ++j) {
        const auto& spec = schema.columns[j];
        if (spec.kind == ColumnKind::categorical) {
            std::map<std::string, std::int64_t> counts;
            for (Eigen::Index i = 0; i < m; ++i)
                if (!is_missing_token(cells[i][j])) ++counts[cells[i][j]];
            if (counts.empty())
                throw DataError("categorical column '" + spec.name + "' has no usable values");
            std::string mode = counts.begin()->first;
            for (const auto& [cat, n] : counts)
                if (n > counts.at(mode)) mode = cat;
            std::int64_t imputed = 0;
            std::map<std::string, int> cat_col;
            for (const auto& [cat, n] : counts) {
                cat_col.emplace(cat, static_cast<int>(encoded_cols.size()));
                encoded_cols.emplace_back(Eigen::VectorXd::Zero(m));
                table.columns.push_back(
                    {spec.name + "=" + cat, static_cast<int>(j), cat, spec.is_protected});
            }
            for (Eigen::Index i = 0; i < m; ++i) {
                std::string v = cells[i][j];
                if (is_missing_token(v)) {
                    v = mode;
                    ++imputed;
                }
                encoded_cols[cat_col.at(v)][i] = 1.0;
            }
            if (imputed > 0) stats.imputed_cells.emplace_back(spec.name, imputed);
        } else {
            Eigen::VectorXd col(m);
            std::vector<Eigen::Index> missing;
            double sum = 0;
            Eigen::Index present = 0;
            for (Eigen::Index i = 0; i < m; ++i) {
                double v;
                if (is_missing_token(cells[i][j])) {
                    missing.push_back(i);
                } else if (!parse_double(cells[i][j], v) || !std::isfinite(v)) {
                    throw DataError("cannot parse numeric cell '" + cells[i][j] +
                                    "' in column '" + spec.name + "'");
                } else {
                    if (spec.kind == ColumnKind::binary && v != 0.0 && v != 1.0)
                        throw DataError("binary column '" + spec.name + "' has value " +
                                        cells[i][j]);
                    col[i] = v;
                    sum += v;
                    ++present;
                }
            }
            if (present == 0)
                throw DataError("numeric column '" + spec.name + "' has no usable values");
            const double mean = sum / static_cast<double>(present);
            for (auto i : missing) col[i] = mean;
            if (!missing.empty())
                stats.imputed_cells.emplace_back(spec.name,
                                                 static_cast<std::int64_t>(missing.size()));
            table.columns.push_back({spec.name, static_cast<int>(j), "", spec.is_protected});
            encoded_cols.push_back(std::move(col));
        }
    }

    table.X.resize(m, static_cast<Eigen::Index>(encoded_cols.size()));
    for (std::size_t c = 0; c < encoded_cols.size(); ++c) table.X.col(c) = encoded_cols[c];
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        if (table.columns[c].is_protected) table.protected_idx.push_back(static_cast<int>(c));
    table.outcome = Eigen::Map<Eigen::VectorXd>(outcomes.data(), m);
    table.row_ids = std::move(row_ids);
    table.query_ids = std::move(queries);
    table.stats = stats;

    // Row-level protected flags.
    ProtectedFlagRule rule;
    bool have_rule = false;
    if (schema.protected_flag) {
        rule = *schema.protected_flag;
        have_rule = true;
    } else {
        for (const auto& c : schema.columns) {
            if (c.is_protected) {
                if (c.kind == ColumnKind::categorical)
                    throw SchemaError("protected categorical column '" + c.name +
                                      "' needs an explicit protected_flag rule");
                rule = {c.name, "1"};
                have_rule = true;
                break;
            }
        }
    }
    table.protected_flag.assign(m, 0);
    if (have_rule) {
        std::size_t raw_j = 0;
        for (; raw_j < ncols_raw; ++raw_j)
            if (schema.columns[raw_j].name == rule.column) break;
        if (raw_j == ncols_raw)
            throw SchemaError("protected_flag column '" + rule.column + "' not in schema");
        double rule_num;
        const bool rule_is_num = parse_double(rule.equals, rule_num);
        for (Eigen::Index i = 0; i < m; ++i) {
            const std::string& cell = cells[i][raw_j];
            double v;
            if (rule_is_num && parse_double(cell, v))
                table.protected_flag[i] = (v == rule_num) ? 1 : 0;
            else
                table.protected_flag[i] = (cell == rule.equals) ? 1 : 0;
        }
    }
    return table;
}

ScalingParams compute_unit_variance(const DataTable& table) {
    if (table.rows() == 0) throw DataError("cannot compute scaling of an empty table");
    ScalingParams params;
    params.column_std.resize(table.cols());
    const auto m = table.rows();
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
        if (m < 2) {
            params.column_std[c] = 0.0;
            continue;
        }
        const double mean = table.X.col(c).mean();
        const double ss = (table.X.col(c).array() - mean).square().sum();
        params.column_std[c] = std::sqrt(ss / static_cast<double>(m - 1));
    }
    return params;
}

DataTable apply_scaling(const DataTable& table, const ScalingParams& params) {
    if (params.column_std.size() != table.cols())
        throw ShapeError("scaling parameter width does not match table");
    DataTable out = table;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const double sd = params.column_std[c];
        if (sd > 0.0)
            for (Eigen::Index i = 0; i < out.rows(); ++i) out.X(i, c) = table.X(i, c) / sd;
    }
    return out;
}

DataTable normalize_unit_variance(const DataTable& table) {
    return apply_scaling(table, compute_unit_variance(table));
}

SplitIndices make_split_indices(Eigen::Index rows, const SplitSpec& spec) {
    const double total = spec.fractions[0] + spec.fractions[1] + spec.fractions[2];
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
    for (double f : spec.fractions)
        if (f <= 0.0) throw ConfigError("split fractions must be positive");

    std::vector<int> order(static_cast<std::size_t>(rows));
    for (Eigen::Index i = 0; i < rows; ++i) order[i] = static_cast<int>(i);
    Rng rng(mix_seed(spec.seed, 0xd1f7));
    for (Eigen::Index i = rows - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[i], order[j]);
    }
    const auto n1 = static_cast<std::size_t>(std::llround(spec.fractions[0] * rows));
    const auto n12 =
        static_cast<std::size_t>(std::llround((spec.fractions[0] + spec.fractions[1]) * rows));
    SplitIndices idx;
    idx.train.assign(order.begin(), order.begin() + n1);
    idx.validation.assign(order.begin() + n1, order.begin() + n12);
    idx.test.assign(order.begin() + n12, order.end());
    if (idx.train.empty() || idx.validation.empty() || idx.test.empty())
        throw ConfigError("split produced an empty part");
    std::sort(idx.train.begin(), idx.train.end());
    std::sort(idx.validation.begin(), idx.validation.end());
    std::sort(idx.test.begin(), idx.test.end());
    return idx;
}

Split split(const DataTable& table, const SplitSpec& spec) {
    Split out;
    out.indices = make_split_indices(table.rows(), spec);
    out.train = table.select_rows(out.indices.train);
    out.validation = table.select_rows(out.indices.validation);
    out.test = table.select_rows(out.indices.test);
    return out;
}

DataTable mask_protected(const DataTable& table) {
    if (table.protected_idx.empty()) return table;
    DataTable out;
    out.task = table.task;
    out.outcome = table.outcome;
    out.row_ids = table.row_ids;
    out.protected_flag = table.protected_flag;
    out.query_ids = table.query_ids;
    out.stats = table.stats;
    const auto keep = table.nonprotected_idx();
    out.X.resize(table.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.X.col(j) = table.X.col(keep[j]);
        out.columns.push_back(table.columns[keep[j]]);
    }
    return out;
}

void write_table_csv(const DataTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "__row_id";
    if (!table.query_ids.empty()) out << ",__query";
    for (const auto& c : table.columns) out << "," << c.name;
    out << ",__outcome,__protected\n";
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        out << table.row_ids[i];
        if (!table.query_ids.empty()) out << "," << table.query_ids[i];
        for (Eigen::Index j = 0; j < table.cols(); ++j) out << "," << format_double(table.X(i, j));
        out << "," << format_double(table.outcome[i]) << ","
            << static_cast<int>(table.protected_flag[i]) << "\n";
    }
}

DataTable read_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty table file: " + path);
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header.front() != "__row_id")
        throw DataError("not a prepared table file: " + path);
    const bool has_query = header.size() > 1 && header[1] == "__query";
    const std::size_t first_feature = has_query ? 2 : 1;
    if (header[header.size() - 2] != "__outcome" || header.back() != "__protected")
        throw DataError("not a prepared table file: " + path);
    const std::size_t nfeat = header.size() - first_feature - 2;

    DataTable table;
    for (std::size_t j = 0; j < nfeat; ++j)
        table.columns.push_back({header[first_feature + j], -1, "", false});
    std::vector<std::vector<double>> rows;
    std::vector<double> outcomes;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("ragged row in " + path);
        table.row_ids.push_back(fields[0]);
        if (has_query) table.query_ids.push_back(fields[1]);
        std::vector<double> row(nfeat);
        for (std::size_t j = 0; j < nfeat; ++j) {
            if (!parse_double(fields[first_feature + j], row[j]))
                throw DataError("bad numeric cell in " + path);
        }
        rows.push_back(std::move(row));
        double y, fl;
        if (!parse_double(fields[header.size() - 2], y) || !parse_double(fields.back(), fl))
            throw DataError("bad outcome/flag cell in " + path);
        outcomes.push_back(y);
        table.protected_flag.push_back(fl != 0.0 ? 1 : 0);
    }
    const auto m = static_cast<Eigen::Index>(rows.size());
    if (m == 0) throw DataError("no rows in " + path);
    table.X.resize(m, static_cast<Eigen::Index>(nfeat));
    for (Eigen::Index i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nfeat; ++j) table.X(i, static_cast<Eigen::Index>(j)) = rows[i][j];
    table.outcome = Eigen::Map<Eigen::VectorXd>(outcomes.data(), m);
    return table;
}

}  // namespace ifair
